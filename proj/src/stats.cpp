#include "rsjd/stats.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rsjd {

void RunningMoments::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningMoments::variance() const {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double RunningMoments::std_error() const {
  return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

MeanEstimate estimate_mean(std::span<const double> samples) {
  RunningMoments m;
  for (double s : samples) m.add(s);
  return {m.mean(), m.std_error(), m.count()};
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

double ks_statistic_exponential(std::vector<double> samples, double rate) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic_exponential: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

double kolmogorov_pvalue(double statistic, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double chi_square_pvalue(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

double total_variation(std::span<const double> counts_a, std::span<const double> counts_b) {
  if (counts_a.size() != counts_b.size()) throw std::invalid_argument("total_variation: bin mismatch");
  const double na = std::accumulate(counts_a.begin(), counts_a.end(), 0.0);
  const double nb = std::accumulate(counts_b.begin(), counts_b.end(), 0.0);
  if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("total_variation: empty histogram");
  double sum = 0.0;
  for (std::size_t i = 0; i < counts_a.size(); ++i) sum += std::abs(counts_a[i] / na - counts_b[i] / nb);
  return 0.5 * sum;
}

double poisson_tail(double mean, int n) {
  if (n <= 0) return 1.0;
  if (mean <= 0.0) return 0.0;
  // log of the first tail term, then a forward recurrence until terms vanish
  double log_term = -mean + n * std::log(mean) - std::lgamma(static_cast<double>(n) + 1.0);
  double term = std::exp(log_term);
  double sum = 0.0;
  for (int m = n; m < n + 100000; ++m) {
    sum += term;
    term *= mean / static_cast<double>(m + 1);
    if (term < sum * 1e-18) break;
  }
  return sum;
}

}  // namespace rsjd
