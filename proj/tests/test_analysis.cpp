#include <cmath>

#include "ccm/analysis.hpp"
#include "ccm/builder.hpp"
#include "ccm/report_io.hpp"
#include "doctest.h"
#include "test_cases.hpp"

using namespace ccm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("comparison on the study case") {
  const Case c = builtin_case_study(1);
  const ComparisonReport rep = run_comparison(c);

  CHECK(rep.rt.objective <= rep.no_rt.objective + 1e-7 * (1.0 + rep.no_rt.objective));
  CHECK(rep.cost_reduction >= -1e-9);
  CHECK(rep.cost_reduction <= 0.05);
  CHECK(rep.clearing_residual <= 1e-6);
  CHECK(rep.budget_residual <= 1e-6);
  CHECK(rep.propositions.all_pass());
  CHECK(rep.rt.kkt.pass);
  CHECK(rep.no_rt.kkt.pass);

  SUBCASE("prices and dispatch are trade-invariant") {
    CHECK(std::abs(rep.rt.prices.lambda_system - rep.no_rt.prices.lambda_system) <= 1e-4);
    for (std::size_t i = 0; i < rep.rt.generators.size(); ++i)
      CHECK(std::abs(rep.rt.generators[i].p_mw - rep.no_rt.generators[i].p_mw) <= 1e-4);
  }

  SUBCASE("energy cost components match") {
    CHECK(rep.rt.energy_cost == doctest::Approx(rep.no_rt.energy_cost).epsilon(1e-6));
    CHECK(rep.rt.reserve_cost <= rep.no_rt.reserve_cost + 1e-6);
    CHECK(rep.rt.objective ==
          doctest::Approx(rep.rt.energy_cost + rep.rt.reserve_cost).epsilon(1e-6));
  }

  SUBCASE("trade table is symmetric across mirrored events") {
    for (const auto& g : rep.rt.generators) {
      REQUIRE(g.trades.size() == 8);
      for (int w = 0; w < 4; ++w)
        CHECK(std::abs(g.trades[w] - g.trades[7 - w]) <= 1e-4);
    }
  }

  SUBCASE("reports serialize deterministically") {
    const std::string a = comparison_report_to_json(c, rep);
    const std::string b = comparison_report_to_json(c, run_comparison(c));
    CHECK(a == b);
    CHECK(a.find("\"propositions\"") != std::string::npos);
  }
}

TEST_CASE("identical beliefs make securities worthless") {
  const Case c = testcases::single_res_case({{"g1", 0.3, 10.0, 0.0, 60.0, 0.0, "n1"},
                                             {"g2", 0.6, 14.0, 0.0, 60.0, 0.0, "n1"}},
                                            70.0, 5.0, 1.5);
  const ComparisonReport rep = run_comparison(c);
  CHECK(rep.rt.objective == doctest::Approx(rep.no_rt.objective).epsilon(1e-6));
  for (const auto& g : rep.rt.generators) {
    CHECK(g.trades.cwiseAbs().maxCoeff() <= 1e-5);  // minimum-norm tie break
    CHECK(std::abs(g.premium) <= 1e-6);
  }
}

TEST_CASE("disjoint belief sets surface as a diagnosed failure") {
  // Two producers with single, different beliefs and no shared covariance:
  // each would bet arbitrarily against the other, so the trading market has
  // no finite optimum and the driver must say why.
  Case c = testcases::single_res_case({{"g1", 0.3, 10.0, 0.0, 60.0, 0.0, "n1"},
                                       {"g2", 0.6, 14.0, 0.0, 60.0, 0.0, "n1"}},
                                      70.0, 5.0, 1.5);
  c.require_common_membership = false;
  c.risk_sets[0].covariances = {Eigen::MatrixXd::Constant(1, 1, 0.25)};
  c.risk_sets[1].covariances = {Eigen::MatrixXd::Constant(1, 1, 9.0)};
  c.validate();

  CHECK(diagnose_belief_disjointness(c).has_value());
  CHECK_THROWS_WITH_AS(run_comparison(c), doctest::Contains("disjoint"), SolveFailure);

  SUBCASE("the no-trading formulation still clears") {
    CHECK_NOTHROW(run_clearing(c, FormulationKind::RiskAverse));
  }
}

TEST_CASE("proposition report carries residuals and notes") {
  const Case c = builtin_case_study(3);
  const ConicProgram pr = build_program(c, FormulationKind::RiskTrading);
  const Solution sol = solve(pr);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const Prices prices = extract_prices(pr, sol);
  const PropositionReport rep = verify_propositions(c, pr, sol, prices);
  CHECK(rep.all_pass());

  int shared = 0;
  bool has_p2 = false;
  for (const auto& it : rep.items) {
    if (it.name.rfind("p1_shared_measure", 0) == 0) {
      ++shared;
      CHECK(it.note.find("disjoint") != std::string::npos);
    }
    if (it.name == "p2_worst_case_cost") has_p2 = true;
  }
  CHECK(shared == c.num_gens());
  CHECK(has_p2);

  SUBCASE("requires a trading solution") {
    const ConicProgram ra = build_program(c, FormulationKind::RiskAverse);
    const Solution ra_sol = solve(ra);
    const Prices ra_prices = extract_prices(ra, ra_sol);
    CHECK_THROWS_AS(verify_propositions(c, ra, ra_sol, ra_prices), std::invalid_argument);
  }
}

TEST_CASE("grid oracle brackets the conic optimum on desk toys") {
  SUBCASE("zero uncertainty matches merit order exactly on grid points") {
    Case c = testcases::single_res_case({{"g1", 0.0, 10.0, 0.0, 60.0, 0.0, "n1"},
                                         {"g2", 0.0, 20.0, 0.0, 60.0, 0.0, "n1"}},
                                        100.0, 0.0, 0.0);
    const OracleResult r = brute_force_oracle(c, FormulationKind::RiskNeutral, 0.5);
    CHECK(r.found_feasible);
    CHECK(r.best_objective == doctest::Approx(1400.0).epsilon(1e-12));
  }

  SUBCASE("risk-averse toy against the solver") {
    Case c = testcases::single_res_case({{"g1", 0.4, 12.0, 0.0, 50.0, 0.0, "n1"},
                                         {"g2", 0.7, 16.0, 0.0, 50.0, 0.0, "n1"}},
                                        60.0, 4.0, 1.2, 0.05, {2.0});
    const double step = 0.01;
    const OracleResult r = brute_force_oracle(c, FormulationKind::RiskAverse, step);
    const Solution sol = solve(build_program(c, FormulationKind::RiskAverse));
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(r.found_feasible);
    CHECK(sol.objective_value <= r.best_objective + 1e-6);
    CHECK(r.best_objective <= sol.objective_value + 100.0 * step);
  }

  SUBCASE("trading toy confirms the benefit and the solution feasibility") {
    Case c = testcases::single_res_case({{"g1", 0.4, 12.0, 0.0, 50.0, 0.0, "n1"},
                                         {"g2", 0.7, 16.0, 0.0, 50.0, 0.0, "n1"}},
                                        60.0, 4.0, 1.2, 0.05, {2.4}, {-1.0, 1.0});
    // Make the producers disagree while keeping the common belief.
    c.risk_sets[1].covariances[0] = Eigen::MatrixXd::Constant(1, 1, 0.04);
    c.validate();
    const double step = 0.05;
    const OracleResult rt = brute_force_oracle(c, FormulationKind::RiskTrading, step, 6.0);
    const OracleResult ra = brute_force_oracle(c, FormulationKind::RiskAverse, step);
    CHECK(rt.best_objective <= ra.best_objective + 1e-9);

    const ConicProgram pr = build_program(c, FormulationKind::RiskTrading);
    const Solution sol = solve(pr);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value <= rt.best_objective + 1e-6);
    CHECK(rt.best_objective <= sol.objective_value + 100.0 * step);

    // The oracle's feasibility checker accepts the conic point.
    VectorXd p(2);
    MatrixXd alpha(2, 1), trades(2, 3);
    for (int i = 0; i < 2; ++i) {
      p[i] = sol.primal[pr.label("p_G[" + std::to_string(i) + "]").index];
      alpha(i, 0) = sol.primal[pr.label("alpha[" + std::to_string(i) + "][0]").index];
      for (int w = 0; w < 3; ++w)
        trades(i, w) =
            sol.primal[pr.label("a[" + std::to_string(i) + "][" + std::to_string(w) + "]").index];
    }
    CHECK(oracle_feasible(c, p, alpha, trades, 1e-6));
    CHECK(oracle_objective(c, FormulationKind::RiskTrading, p, alpha, trades) ==
          doctest::Approx(sol.objective_value).epsilon(1e-6));
  }

  SUBCASE("guards") {
    CHECK_THROWS_AS(brute_force_oracle(builtin_case_study(1), FormulationKind::RiskAverse, 0.1),
                    std::invalid_argument);
    Case c = testcases::single_res_case({{"g1", 0.4, 12.0, 0.0, 50.0, 0.0, "n1"},
                                         {"g2", 0.7, 16.0, 0.0, 50.0, 0.0, "n1"}},
                                        60.0, 4.0, 1.2, 0.05, {2.0}, {-1.0, 0.0, 1.0});
    CHECK_THROWS_AS(brute_force_oracle(c, FormulationKind::RiskTrading, 1e-4),
                    std::length_error);
  }
}

TEST_CASE("price invariance under belief rescaling") {
  // Energy prices depend on cost coefficients and dispatch, not on the
  // risk sets; doubling every belief leaves lambda unchanged as long as
  // the capacity pattern stays the same.
  const Case base = builtin_case_study(5);
  Case scaled = base;
  for (auto& rs : scaled.risk_sets)
    for (auto& cov : rs.covariances)
      if ((cov - scaled.sigma_common).cwiseAbs().maxCoeff() > 1e-12) cov *= 1.5;
  scaled.validate();

  const FormulationOutcome a = run_clearing(base, FormulationKind::RiskTrading);
  const FormulationOutcome b = run_clearing(scaled, FormulationKind::RiskTrading);
  CHECK(std::abs(a.prices.lambda_system - b.prices.lambda_system) <= 1e-4);
}
