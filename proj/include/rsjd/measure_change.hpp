#pragma once

#include "rsjd/model.hpp"
#include "rsjd/simulate.hpp"
#include "rsjd/stats.hpp"
#include "rsjd/test_functions.hpp"

#include <vector>

namespace rsjd {

/// Constant banded generator with diagonal -2 kappa and 2 kappa unit entries per
/// row: l in {0..2 kappa} \ {k} for k < kappa, |l - k| <= kappa otherwise.
struct AuxiliaryChainSpec {
  int kappa = 1;
  int working_band = 0;                    // rows 0..working_band are materialized
  std::vector<std::vector<double>> rows;   // dense rows over columns 0..columns()-1

  std::vector<Regime> targets(Regime k) const;
  double rate(Regime k, Regime l) const;
  double total_rate() const { return 2.0 * kappa; }
  std::size_t columns() const { return rows.empty() ? 0 : rows.front().size(); }
};

AuxiliaryChainSpec build_qhat(int kappa, int working_band = 0);

struct WeightedPath {
  HybridPath path;              // (V, psi), recorded when requested
  std::vector<double> epochs;   // switch epochs of psi
  std::size_t switches = 0;
  double log_weight = 0.0;      // -inf when a factor vanished
  double weight = 1.0;
  bool annihilated = false;     // stopped early because the weight hit 0
  PathStatus status = PathStatus::completed;
  Point terminal;
  Regime terminal_regime = 0;
};

struct AuxiliaryOptions {
  std::uint64_t path_index = 0;
  std::uint64_t chain_salt = 0;  // alternative psi stream, V's drivers unchanged
  bool record = false;
};

/// psi is the constant-rate chain on its own stream; V is integrated with
/// coefficients frozen at psi. Refuses models whose band exceeds kappa.
WeightedPath simulate_auxiliary(const ModelSpec& model, const AuxiliaryChainSpec& aux, const Point& x0, Regime k0,
                                const SimConfig& config, const AuxiliaryOptions& options = {});

/// M_T recomputed from a recorded path (trapezoid rule on the recorded grid).
double rn_weight(const ModelSpec& model, const AuxiliaryChainSpec& aux, const HybridPath& path, double horizon);

struct WeightedEstimate {
  MeanEstimate estimate;      // mean of f(V_T, psi_T) M_T
  MeanEstimate weight;        // mean of M_T
  double effective_sample_size = 0.0;  // n / (1 + cv^2)
  std::size_t zero_weights = 0;
  std::size_t excluded = 0;
  bool degenerate = false;    // every weight was 0
};

WeightedEstimate weighted_expectation(const ModelSpec& model, const AuxiliaryChainSpec& aux, const TestFunction& f,
                                      const Point& x0, Regime k0, const SimConfig& config,
                                      std::uint64_t chain_salt = 0);

/// Plain Monte Carlo of E f(X_T, Lambda_T) with simulate_hybrid.
MeanEstimate direct_expectation(const ModelSpec& model, const TestFunction& f, const Point& x0, Regime k0,
                                const SimConfig& config, std::size_t* excluded = nullptr);

}  // namespace rsjd
