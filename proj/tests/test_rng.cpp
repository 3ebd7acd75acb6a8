#include "rsjd/quadrature.hpp"
#include "rsjd/rng.hpp"
#include "rsjd/stats.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

using namespace rsjd;

TEST_CASE("philox known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::block(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::block(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are addressed, not stateful") {
  RandomStream a(5, 17, Substream::brownian);
  RandomStream b(5, 17, Substream::brownian);
  RandomStream other_sub(5, 17, Substream::bridge);
  RandomStream other_path(5, 18, Substream::brownian);
  RandomStream other_salt(5, 17, Substream::brownian, 1);
  int same_sub = 0, same_path = 0, same_salt = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x = a.next_u32();
    REQUIRE(x == b.next_u32());
    same_sub += x == other_sub.next_u32();
    same_path += x == other_path.next_u32();
    same_salt += x == other_salt.next_u32();
  }
  CHECK(same_sub < 2);
  CHECK(same_path < 2);
  CHECK(same_salt < 2);
}

TEST_CASE("variates have the right first moments") {
  RandomStream rng(1, 0, Substream::probes);
  RunningMoments u, n, e;
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 200000; ++i) {
    const double v = rng.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
    u.add(v);
    n.add(rng.normal());
    e.add(rng.exponential());
    const auto b = rng.below(5);
    REQUIRE(b < 5);
    ++hist[b];
  }
  CHECK(std::abs(u.mean() - 0.5) < 4 * u.std_error());
  CHECK(u.variance() == doctest::Approx(1.0 / 12).epsilon(0.01));
  CHECK(std::abs(n.mean()) < 4 * n.std_error());
  CHECK(n.variance() == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(e.mean() - 1.0) < 4 * e.std_error());
  double chi = 0.0;
  for (int c : hist) chi += (c - 40000.0) * (c - 40000.0) / 40000.0;
  CHECK(chi_square_pvalue(chi, 4) > 0.001);
}

TEST_CASE("gauss rules integrate polynomials exactly") {
  const auto leg = gauss_legendre(8);
  double s = 0.0;
  for (std::size_t i = 0; i < leg.nodes.size(); ++i) s += leg.weights[i] * std::pow(leg.nodes[i], 6);
  CHECK(s == doctest::Approx(2.0 / 7.0).epsilon(1e-12));

  // int_0^inf x^5 e^{-x} dx = 120
  const auto lag = gauss_laguerre(10);
  s = 0.0;
  for (std::size_t i = 0; i < lag.nodes.size(); ++i) s += lag.weights[i] * std::pow(lag.nodes[i], 5);
  CHECK(s == doctest::Approx(120.0).epsilon(1e-10));

  // E Z^4 = 3 under the standard normal weight
  const auto her = gauss_hermite_probabilist(10);
  s = 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < her.nodes.size(); ++i) {
    s += her.weights[i] * std::pow(her.nodes[i], 4);
    mass += her.weights[i];
  }
  CHECK(s / mass == doctest::Approx(3.0).epsilon(1e-10));
}
