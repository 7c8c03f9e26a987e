#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ccm/stochastic.hpp"
#include "doctest.h"

using namespace ccm;

namespace {

Eigen::MatrixXd random_psd(int dim, std::mt19937_64& rng, int rank = -1) {
  if (rank < 0) rank = dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd f(dim, rank);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < rank; ++j) f(i, j) = normal(rng);
  return f * f.transpose();
}

}  // namespace

TEST_CASE("normal cdf matches the extended-precision reference table") {
  std::ifstream in(std::string(CCM_TEST_DATA_DIR) + "/normal_cdf_reference.csv");
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    const double x = std::stod(line.substr(0, comma));
    const double phi = std::stod(line.substr(comma + 1));
    CHECK(std::abs(std_normal_cdf(x) - phi) <= 1e-15);
    ++rows;
  }
  CHECK(rows >= 30);
}

TEST_CASE("normal cdf basics") {
  CHECK(std_normal_cdf(0.0) == 0.5);
  CHECK(std_normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(std_normal_cdf(-1e9) == 0.0);  // underflow to exact zero is fine
  CHECK(std_normal_cdf(1e9) == 1.0);

  // Symmetry by construction, and monotonicity on a sweep.
  double prev = -1.0;
  for (int i = -600; i <= 600; ++i) {
    const double x = i / 100.0;
    CHECK(std::abs(std_normal_cdf(-x) - (1.0 - std_normal_cdf(x))) <= 2e-16);
    const double v = std_normal_cdf(x);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("normal quantile") {
  CHECK(std_normal_quantile(0.5) == 0.0);
  CHECK(std_normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(std_normal_quantile(0.975) == doctest::Approx(1.9599639845400542).epsilon(1e-12));
  CHECK_THROWS_AS(std_normal_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(std_normal_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(std_normal_quantile(-0.2), std::domain_error);

  SUBCASE("agrees with a bisection oracle to 1e-12") {
    for (double p : {0.01, 0.2, 0.6321, 0.95, 0.999}) {
      double lo = -10.0, hi = 10.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (std_normal_cdf(mid) < p ? lo : hi) = mid;
      }
      CHECK(std::abs(std_normal_quantile(p) - 0.5 * (lo + hi)) <= 1e-12);
    }
  }

  SUBCASE("mutual inverse over [-6, 6]") {
    for (int i = -60; i <= 60; ++i) {
      const double x = i / 10.0;
      CHECK(std::abs(std_normal_quantile(std_normal_cdf(x)) - x) <= 1e-9);
    }
  }
}

TEST_CASE("matrix square root") {
  CHECK((matrix_sqrt(Eigen::MatrixXd::Identity(4, 4)) - Eigen::MatrixXd::Identity(4, 4))
            .norm() <= 1e-12);

  Eigen::MatrixXd d = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  Eigen::MatrixXd s = matrix_sqrt(d);
  CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(1e-12));

  SUBCASE("reconstruction property on random PSD matrices") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd sigma = random_psd(5, rng, trial % 2 ? 5 : 3);
      const Eigen::MatrixXd r = matrix_sqrt(sigma);
      CHECK((r - r.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((r * r - sigma).norm() <= 1e-8 * (1.0 + sigma.norm()));
    }
  }

  SUBCASE("rejects indefinite input") {
    Eigen::MatrixXd bad = Eigen::Vector2d(1.0, -0.5).asDiagonal();
    CHECK_THROWS_AS(matrix_sqrt(bad), std::invalid_argument);
  }
}

TEST_CASE("aggregate sigma") {
  CHECK(aggregate_sigma(Eigen::MatrixXd::Identity(5, 5)).value ==
        doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
  CHECK(aggregate_sigma(Eigen::MatrixXd::Zero(3, 3)).value == 0.0);
  CHECK(aggregate_sigma(Eigen::MatrixXd::Ones(5, 5)).value ==
        doctest::Approx(5.0).epsilon(1e-12));

  SUBCASE("equals the norm of e' Sigma^(1/2)") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::MatrixXd sigma = random_psd(4, rng);
      const Eigen::VectorXd row =
          matrix_sqrt(sigma).transpose() * Eigen::VectorXd::Ones(4);
      CHECK(std::abs(aggregate_sigma(sigma).value - row.norm()) <= 1e-9);
    }
  }
}

TEST_CASE("event probabilities") {
  SUBCASE("single breakpoint at zero splits evenly") {
    EventPartition part{{0.0}, PartitionUnit::Mw};
    const auto p = event_probabilities(part, AggregateSigma{1.0}, 0.0);
    CHECK(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("breakpoints {-1, 1} at sigma 1") {
    EventPartition part{{-1.0, 1.0}, PartitionUnit::Mw};
    const auto p = event_probabilities(part, AggregateSigma{1.0}, 0.0);
    CHECK(p[0] == doctest::Approx(0.158655253931457).epsilon(1e-9));
    CHECK(p[1] == doctest::Approx(0.682689492137086).epsilon(1e-9));
    CHECK(p[2] == doctest::Approx(0.158655253931457).epsilon(1e-9));
  }

  SUBCASE("normalization and symmetry") {
    EventPartition part{{-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2},
                        PartitionUnit::FractionOfTotalForecast};
    for (double sigma : {0.5, 1.0, 3.0}) {
      const auto p = event_probabilities(part, AggregateSigma{sigma}, 25.0);
      double sum = 0.0;
      for (double v : p) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      for (std::size_t w = 0; w < p.size(); ++w)
        CHECK(std::abs(p[w] - p[p.size() - 1 - w]) <= 1e-12);
    }
  }

  SUBCASE("unit conversion") {
    EventPartition frac{{-0.2, 0.2}, PartitionUnit::FractionOfTotalForecast};
    EventPartition mw{{-5.0, 5.0}, PartitionUnit::Mw};
    const auto a = event_probabilities(frac, AggregateSigma{2.0}, 25.0);
    const auto b = event_probabilities(mw, AggregateSigma{2.0}, 999.0);
    for (std::size_t w = 0; w < a.size(); ++w) CHECK(a[w] == doctest::Approx(b[w]));
  }

  SUBCASE("degenerate sigma gives a point mass, ties to the interval starting at 0") {
    EventPartition part{{-1.0, 0.0, 1.0}, PartitionUnit::Mw};
    const auto p = event_probabilities(part, AggregateSigma{0.0}, 0.0);
    CHECK(p == std::vector<double>{0.0, 0.0, 1.0, 0.0});

    EventPartition no_zero{{-1.0, 1.0}, PartitionUnit::Mw};
    const auto q = event_probabilities(no_zero, AggregateSigma{0.0}, 0.0);
    CHECK(q == std::vector<double>{0.0, 1.0, 0.0});
  }

  SUBCASE("rejects bad partitions") {
    CHECK_THROWS_AS(event_probabilities(EventPartition{{1.0, 1.0}, PartitionUnit::Mw},
                                        AggregateSigma{1.0}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(event_probabilities(EventPartition{{}, PartitionUnit::Mw},
                                        AggregateSigma{1.0}, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("monte carlo event frequencies") {
  EventPartition part{{0.0}, PartitionUnit::Mw};

  SUBCASE("a single draw is one-hot") {
    const auto f = monte_carlo_event_probs(part, AggregateSigma{1.0}, 0.0, 1, 3);
    CHECK(f.size() == 2);
    CHECK(f[0] + f[1] == doctest::Approx(1.0));
    CHECK((f[0] == 1.0 || f[1] == 1.0));
  }

  SUBCASE("median split within binomial bounds at a million draws") {
    const auto f = monte_carlo_event_probs(part, AggregateSigma{1.0}, 0.0, 1'000'000, 42);
    const double bound = 3.0 * std::sqrt(0.25 / 1e6);
    CHECK(std::abs(f[0] - 0.5) <= bound);
    CHECK(std::abs(f[1] - 0.5) <= bound);
  }

  SUBCASE("statistical agreement with the analytic probabilities") {
    EventPartition wide{{-1.5, -0.3, 0.4, 2.0}, PartitionUnit::Mw};
    const std::int64_t n = 200'000;
    const auto analytic = event_probabilities(wide, AggregateSigma{1.3}, 0.0);
    const auto empirical = monte_carlo_event_probs(wide, AggregateSigma{1.3}, 0.0, n, 9);
    for (std::size_t w = 0; w < analytic.size(); ++w) {
      const double se =
          std::sqrt(analytic[w] * (1.0 - analytic[w]) / static_cast<double>(n));
      CHECK(std::abs(empirical[w] - analytic[w]) <= 4.0 * se + 1e-12);
    }
  }

  SUBCASE("deterministic in the seed") {
    const auto a = monte_carlo_event_probs(part, AggregateSigma{2.0}, 0.0, 1000, 5);
    const auto b = monte_carlo_event_probs(part, AggregateSigma{2.0}, 0.0, 1000, 5);
    CHECK(a == b);
  }
}
