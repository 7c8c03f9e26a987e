#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

// Gaussian math used throughout the clearing engine: standard normal
// cdf/quantile, PSD matrix square roots, aggregate standard deviations
// and discrete event probabilities over a partition of the aggregate
// forecast-error line.

namespace ccm {

/// Unit in which partition breakpoints are expressed. Breakpoints are
/// converted to MW before any probability is computed.
enum class PartitionUnit {
  FractionOfTotalForecast,  // breakpoint * total RES forecast [MW]
  Mw,                       // already MW
  FractionOfSigma,          // breakpoint * aggregate sigma [MW]
};

/// Ordered breakpoints splitting the aggregate-error line into W = size()+1
/// closed intervals [l_w, u_w] with l_1 = -inf and u_W = +inf.
struct EventPartition {
  std::vector<double> breakpoints;  // strictly increasing
  PartitionUnit unit = PartitionUnit::FractionOfTotalForecast;

  int num_events() const { return static_cast<int>(breakpoints.size()) + 1; }
  /// Throws std::invalid_argument unless breakpoints are strictly
  /// increasing and W >= 2.
  void validate() const;
  /// Breakpoints in MW given the case's total RES forecast and an
  /// aggregate sigma (used only for FractionOfSigma).
  std::vector<double> breakpoints_mw(double total_forecast_mw,
                                     double sigma_mw) const;

  bool operator==(const EventPartition&) const = default;
};

/// sigma_k = sqrt(e' Sigma_k e), the standard deviation of the aggregate
/// forecast error under belief k.
struct AggregateSigma {
  double value = 0.0;  // MW, >= 0
};

/// Standard normal cdf. Absolute accuracy below 1e-15; Phi(-x) and
/// 1 - Phi(x) agree to one ulp by construction (both routes evaluate the
/// same erfc tail).
double std_normal_cdf(double x);

/// Inverse of std_normal_cdf on (0,1). |Phi(z) - p| <= 1e-15 over the
/// representable range. Throws std::domain_error for p outside (0,1).
double std_normal_quantile(double p);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues in
/// [-1e-9, 0) are clipped to zero; anything lower throws
/// std::invalid_argument. Result S satisfies S*S = sigma within
/// 1e-8 * (1 + |sigma|_F).
Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& sigma);

/// sqrt(e' sigma e) with tiny negative quadratic forms clipped to zero.
AggregateSigma aggregate_sigma(const Eigen::MatrixXd& sigma);

/// P_w = Phi(u_w / sigma) - Phi(l_w / sigma) per event, breakpoints taken
/// in MW. Sums to 1 within 1e-12. For sigma = 0 the whole mass goes to
/// the interval containing 0, ties resolved to the interval whose lower
/// bound is exactly 0.
std::vector<double> event_probabilities(const EventPartition& partition,
                                        AggregateSigma sigma,
                                        double total_forecast_mw);

/// Empirical interval frequencies of n zero-mean Gaussian draws with
/// standard deviation sigma (Box-Muller over mt19937_64, so results are
/// reproducible across platforms). Oracle for event_probabilities.
std::vector<double> monte_carlo_event_probs(const EventPartition& partition,
                                            AggregateSigma sigma,
                                            double total_forecast_mw,
                                            std::int64_t n,
                                            std::uint64_t seed);

}  // namespace ccm
