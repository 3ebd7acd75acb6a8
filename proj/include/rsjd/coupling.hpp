#pragma once

#include "rsjd/model.hpp"
#include "rsjd/simulate.hpp"
#include "rsjd/stats.hpp"

#include <optional>
#include <vector>

namespace rsjd {

/// Basic coupling of the rows q_i.(x) and q_j.(z).
struct CoupledRates {
  struct Entry {
    Regime target = 0;
    double excess1 = 0.0;  // [q_il(x) - q_jl(z)]^+, moves the first regime only
    double excess2 = 0.0;  // [q_jl(z) - q_il(x)]^+, moves the second regime only
    double joint = 0.0;    // q_il(x) ^ q_jl(z), moves both to l
  };
  std::vector<Entry> entries;  // ascending target
  double total_excess1 = 0.0;
  double total_excess2 = 0.0;
  double total_joint = 0.0;
  double total() const { return total_excess1 + total_excess2 + total_joint; }
};

CoupledRates coupled_switch_rates(const ModelSpec& model, const Point& x, Regime i, const Point& z, Regime j);

struct CoupledState {
  double t = 0.0;
  Point x;
  Regime k = 0;
  Point z;
  Regime l = 0;
};

struct CoupledPath {
  std::vector<CoupledState> states;  // recorded trajectory (when requested)
  std::optional<double> zeta;        // first time the regimes differ
  PathStatus status = PathStatus::completed;
  std::vector<double> checkpoints;
  std::vector<CoupledState> at_checkpoint;
  std::vector<double> stopped_distance;  // |X(t ^ zeta) - Z(t ^ zeta)|
  std::vector<double> stopped_integral;  // int_0^{t ^ zeta} |X - Z| ds
};

struct CoupledOptions {
  std::vector<double> checkpoints;  // defaults to {T}
  std::uint64_t path_index = 0;
  bool record = true;
};

/// Synchronous Brownian and jump drivers, basic coupling of the switching
/// before zeta and independent switching clocks after it.
CoupledPath simulate_coupled(const ModelSpec& model, const Point& x0, const Point& z0, Regime k0,
                             const SimConfig& config, const CoupledOptions& options = {});

struct CouplingPoint {
  double t = 0.0;
  MeanEstimate distance;           // E|X(t ^ zeta) - Z(t ^ zeta)|
  MeanEstimate decoupled;          // P(zeta <= t)
  MeanEstimate distance_integral;  // E int_0^{t ^ zeta} |X - Z| ds
  MeanEstimate x_mean;             // E X(t)_0, all paths (post-zeta included)
  MeanEstimate z_mean;
};

struct CouplingReport {
  double gap = 0.0;
  std::vector<CouplingPoint> points;
  bool exact_coupling = false;  // every distance is 0
  /// Smallest C with E distance <= gap e^{C t} at every checkpoint.
  double fitted_c = 0.0;
  /// Least-squares slope of log(E distance / gap) against t, with its intercept and R^2.
  double regression_c = 0.0;
  double fit_intercept = 0.0;
  double fit_r_squared = 0.0;
  bool bound_holds = false;  // E distance <= gap e^{fitted_c t} + 3 SE at every checkpoint
  std::size_t used = 0;
  std::size_t excluded = 0;
};

CouplingReport contraction_estimate(const ModelSpec& model, const Point& x, const Point& z, Regime k,
                                    const SimConfig& config, const std::vector<double>& checkpoints);

/// Fraction of replicas with zeta <= T.
MeanEstimate decoupling_probability(const ModelSpec& model, const Point& x, const Point& z, Regime k,
                                    const SimConfig& config);

}  // namespace rsjd
