#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rsjd {

/// Streaming mean/variance (Welford). Merge order is part of the result, so
/// ensemble code always feeds samples in path-index order.
class RunningMoments {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const;
  /// Standard error of the mean.
  double std_error() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

MeanEstimate estimate_mean(std::span<const double> samples);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x; needs at least two distinct x.
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// One-sample Kolmogorov-Smirnov statistic against an exponential law with the given rate.
double ks_statistic_exponential(std::vector<double> samples, double rate);

/// Asymptotic Kolmogorov survival function P(K > sqrt(n) D) with the
/// Stephens small-sample correction.
double kolmogorov_pvalue(double statistic, std::size_t n);

/// Upper tail probability of a chi-square variate with `dof` degrees of freedom.
double chi_square_pvalue(double statistic, double dof);

/// Total variation distance between two histograms given as counts.
double total_variation(std::span<const double> counts_a, std::span<const double> counts_b);

/// P(Poisson(mean) >= n), summed directly over the tail.
double poisson_tail(double mean, int n);

}  // namespace rsjd
