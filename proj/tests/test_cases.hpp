#pragma once

// Shared case factories for the test suites.

#include <Eigen/Dense>

#include "ccm/case_model.hpp"

namespace ccm::testcases {

/// Single-node case with the given generators and one RES unit whose
/// forecast error has the given standard deviation (possibly zero).
inline Case single_res_case(std::vector<Generator> gens, double demand, double forecast,
                            double sigma_std, double eps_g = 0.05,
                            std::vector<double> extra_stds = {},
                            std::vector<double> breakpoints = {-0.1, 0.0, 0.1}) {
  Case c;
  for (auto& g : gens) g.node = "n1";
  c.generators = std::move(gens);
  c.res_units = {{"u1", forecast, "n1"}};
  c.network.nodes = {{"n1", demand}};
  c.network.slack_node = "n1";
  c.sigma_common = Eigen::MatrixXd::Constant(1, 1, sigma_std * sigma_std);
  for (const auto& g : c.generators) {
    RiskSet rs;
    rs.producer = g.id;
    for (double s : extra_stds)
      rs.covariances.push_back(Eigen::MatrixXd::Constant(1, 1, s * s));
    rs.covariances.push_back(c.sigma_common);
    c.risk_sets.push_back(rs);
  }
  c.eps_g = eps_g;
  c.eps_f = 0.05;
  c.partition = {std::move(breakpoints), PartitionUnit::Mw};
  c.validate();
  return c;
}

/// Two generators, linear costs 10 and 20 $/MW, caps 60/60, demand 100,
/// zero uncertainty: the classic merit-order dispatch p = (60, 40).
inline Case merit_order_case() {
  return single_res_case({{"g1", 0.0, 10.0, 0.0, 60.0, 0.0, "n1"},
                          {"g2", 0.0, 20.0, 0.0, 60.0, 0.0, "n1"}},
                         100.0, 0.0, 0.0);
}

/// Three-node ring; the line between the cheap generator and the load is
/// tight enough to congest when flow_limit is small.
inline Case ring_case(double flow_limit) {
  Case c;
  c.generators = {{"g1", 0.05, 10.0, 0.0, 120.0, 0.0, "n1"},
                  {"g2", 0.05, 30.0, 0.0, 120.0, 0.0, "n2"}};
  c.res_units = {{"u1", 10.0, "n3"}};
  c.network.nodes = {{"n1", 0.0}, {"n2", 0.0}, {"n3", 90.0}};
  c.network.lines = {{"n1", "n2", 0.1, 200.0},
                     {"n1", "n3", 0.1, flow_limit},
                     {"n2", "n3", 0.1, 200.0}};
  c.network.slack_node = "n1";
  c.sigma_common = Eigen::MatrixXd::Constant(1, 1, 4.0);
  for (const auto& g : c.generators) {
    RiskSet rs;
    rs.producer = g.id;
    rs.covariances = {c.sigma_common};
    c.risk_sets.push_back(rs);
  }
  c.eps_g = 0.05;
  c.eps_f = 0.05;
  c.partition = {{-0.1, 0.0, 0.1}, PartitionUnit::FractionOfTotalForecast};
  c.validate();
  return c;
}

/// The five-producer study case with capacity headroom on every unit, so
/// that all producers hold reserve and no participation factor sits on a
/// bound (keeps the printed reserve-price identity fully evaluated).
inline Case interior_alpha_case(std::uint64_t seed) {
  Case c = builtin_case_study(seed);
  for (auto& g : c.generators) g.p_max += 30.0;
  c.validate();
  return c;
}

}  // namespace ccm::testcases
