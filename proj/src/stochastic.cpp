#include "ccm/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace ccm {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kInvSqrt2 = 0.7071067811865475244008443621;
constexpr double kSqrt2Pi = 2.5066282746310005024157652848;

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }
}  // namespace

void EventPartition::validate() const {
  if (breakpoints.empty())
    throw std::invalid_argument("partition: needs at least one breakpoint (W >= 2)");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!std::isfinite(breakpoints[i]))
      throw std::invalid_argument("partition: non-finite breakpoint");
    if (i > 0 && !(breakpoints[i - 1] < breakpoints[i]))
      throw std::invalid_argument("partition: breakpoints must be strictly increasing");
  }
}

std::vector<double> EventPartition::breakpoints_mw(double total_forecast_mw,
                                                   double sigma_mw) const {
  std::vector<double> out(breakpoints.size());
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    switch (unit) {
      case PartitionUnit::FractionOfTotalForecast:
        out[i] = breakpoints[i] * total_forecast_mw;
        break;
      case PartitionUnit::Mw:
        out[i] = breakpoints[i];
        break;
      case PartitionUnit::FractionOfSigma:
        out[i] = breakpoints[i] * sigma_mw;
        break;
    }
  }
  return out;
}

double std_normal_cdf(double x) {
  // Route both signs through the same erfc tail so that Phi(-x) and
  // 1 - Phi(x) agree to the last bit Sterbenz allows.
  const double tail = 0.5 * std::erfc(std::fabs(x) * kInvSqrt2);
  return x < 0.0 ? tail : 1.0 - tail;
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_quantile: p must lie in (0,1)");
  if (p == 0.5) return 0.0;

  // Acklam's rational initial estimate, then Halley refinements against
  // std_normal_cdf. Two refinements reach full double precision.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double z;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    z = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = std_normal_cdf(z) - p;
    const double f = std_normal_pdf(z);
    if (f <= 0.0) break;
    const double u = e / f;
    z -= u / (1.0 + 0.5 * u * z);  // Halley step
  }
  return z;
}

Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols())
    throw std::invalid_argument("matrix_sqrt: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("matrix_sqrt: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-9 * scale)
      throw std::invalid_argument("matrix_sqrt: matrix is not PSD (eigenvalue " +
                                  std::to_string(ev[i]) + ")");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  Eigen::MatrixXd s =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());  // exact symmetry
}

AggregateSigma aggregate_sigma(const Eigen::MatrixXd& sigma) {
  const double q = Eigen::VectorXd::Ones(sigma.rows()).transpose() * sigma *
                   Eigen::VectorXd::Ones(sigma.cols());
  return AggregateSigma{std::sqrt(std::max(q, 0.0))};
}

std::vector<double> event_probabilities(const EventPartition& partition,
                                        AggregateSigma sigma,
                                        double total_forecast_mw) {
  partition.validate();
  const std::vector<double> bp = partition.breakpoints_mw(total_forecast_mw, sigma.value);
  const int w_count = partition.num_events();
  std::vector<double> probs(static_cast<std::size_t>(w_count), 0.0);

  if (sigma.value <= 0.0) {
    // Point mass at zero. Pick the interval containing 0; a breakpoint at
    // exactly 0 sends the mass to the interval whose lower bound is 0.
    int idx = 0;
    for (std::size_t i = 0; i < bp.size(); ++i)
      if (bp[i] <= 0.0) idx = static_cast<int>(i) + 1;
    probs[static_cast<std::size_t>(idx)] = 1.0;
    return probs;
  }

  std::vector<double> cdf_at(bp.size());
  for (std::size_t i = 0; i < bp.size(); ++i)
    cdf_at[i] = std_normal_cdf(bp[i] / sigma.value);
  double prev = 0.0;
  for (int w = 0; w < w_count; ++w) {
    const double cur = (w == w_count - 1) ? 1.0 : cdf_at[static_cast<std::size_t>(w)];
    probs[static_cast<std::size_t>(w)] = std::max(cur - prev, 0.0);
    prev = cur;
  }
  return probs;
}

std::vector<double> monte_carlo_event_probs(const EventPartition& partition,
                                            AggregateSigma sigma,
                                            double total_forecast_mw,
                                            std::int64_t n,
                                            std::uint64_t seed) {
  partition.validate();
  if (n < 1) throw std::invalid_argument("monte_carlo_event_probs: n must be >= 1");
  const std::vector<double> bp = partition.breakpoints_mw(total_forecast_mw, sigma.value);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(partition.num_events()), 0);

  std::mt19937_64 rng(seed);
  auto uniform01 = [&rng]() {
    // 53-bit mantissa in (0,1]; avoids log(0) below.
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1p-53;
  };
  auto tally = [&](double x) {
    const auto it = std::upper_bound(bp.begin(), bp.end(), x);
    counts[static_cast<std::size_t>(it - bp.begin())]++;
  };

  std::int64_t produced = 0;
  while (produced < n) {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1)) * sigma.value;
    const double t = 2.0 * M_PI * u2;
    tally(r * std::cos(t));
    if (++produced == n) break;
    tally(r * std::sin(t));
    ++produced;
  }

  std::vector<double> freq(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    freq[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  return freq;
}

}  // namespace ccm
