#include <cmath>

#include "ccm/builder.hpp"
#include "ccm/solver.hpp"
#include "doctest.h"
#include "test_cases.hpp"

using namespace ccm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConicProgram box_lp(double demand) {
  // min 10 p1 + 20 p2  s.t. p1 + p2 = demand, 0 <= p <= 60.
  ConicProgram pr;
  pr.num_vars = 2;
  pr.Q = MatrixXd::Zero(2, 2);
  pr.c = VectorXd(2);
  pr.c << 10.0, 20.0;
  pr.A = MatrixXd::Ones(1, 2);
  pr.b = VectorXd::Constant(1, demand);
  pr.G = MatrixXd::Zero(4, 2);
  pr.h = VectorXd::Zero(4);
  pr.G(0, 0) = 1.0;
  pr.h(0) = 60.0;
  pr.G(1, 1) = 1.0;
  pr.h(1) = 60.0;
  pr.G(2, 0) = -1.0;
  pr.G(3, 1) = -1.0;
  pr.labels["balance"] = {LabelKind::EqRow, 0};
  return pr;
}

}  // namespace

TEST_CASE("merit-order dispatch with closed-form duals") {
  const ConicProgram pr = box_lp(100.0);
  const Solution sol = solve(pr);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(1400.0).epsilon(1e-9));
  CHECK(sol.primal[0] == doctest::Approx(60.0).epsilon(1e-8));
  CHECK(sol.primal[1] == doctest::Approx(40.0).epsilon(1e-8));
  // Marginal unit sets the price; raw equality dual is its negative.
  CHECK(-sol.eq_duals[0] == doctest::Approx(20.0).epsilon(1e-8));
  CHECK(sol.ineq_duals.minCoeff() >= -1e-8);

  SUBCASE("complementary slackness is sharp on the zero-uncertainty case") {
    const VectorXd slack = pr.h - pr.G * sol.primal;
    for (int i = 0; i < 4; ++i)
      CHECK(std::abs(sol.ineq_duals[i] * slack[i]) <= 1e-8);
  }

  SUBCASE("strong duality") {
    CHECK(std::abs(sol.duality_gap) <= 1e-6 * (1.0 + std::abs(sol.objective_value)));
  }

  SUBCASE("repeat solves are bit-identical") {
    const Solution again = solve(pr);
    CHECK(again.objective_value == sol.objective_value);
    CHECK((again.primal - sol.primal).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("quadratic single-generator marginal price") {
  // min p^2, p = 10: price 2*c2*p = 20.
  ConicProgram pr;
  pr.num_vars = 1;
  pr.Q = MatrixXd::Constant(1, 1, 2.0);
  pr.c = VectorXd::Zero(1);
  pr.A = MatrixXd::Ones(1, 1);
  pr.b = VectorXd::Constant(1, 10.0);
  pr.G = MatrixXd::Zero(2, 1);
  pr.h = VectorXd::Zero(2);
  pr.G(0, 0) = 1.0;
  pr.h(0) = 100.0;
  pr.G(1, 0) = -1.0;
  const Solution sol = solve(pr);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.primal[0] == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(-sol.eq_duals[0] == doctest::Approx(20.0).epsilon(1e-7));
}

TEST_CASE("norm-ball minimum via a cone block") {
  // min c'x s.t. ||x|| <= 1: optimum -||c|| at x = -c/||c||.
  ConicProgram pr;
  pr.num_vars = 2;
  pr.Q = MatrixXd::Zero(2, 2);
  pr.c = VectorXd(2);
  pr.c << 1.0, 2.0;
  pr.A = MatrixXd::Zero(0, 2);
  pr.b = VectorXd::Zero(0);
  pr.G = MatrixXd::Zero(0, 2);
  pr.h = VectorXd::Zero(0);
  ConicProgram::SocBlock blk;
  blk.E = MatrixXd::Zero(3, 2);
  blk.E(1, 0) = 1.0;
  blk.E(2, 1) = 1.0;
  blk.g = VectorXd::Zero(3);
  blk.g[0] = 1.0;
  pr.soc.push_back(blk);
  const Solution sol = solve(pr);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-8));
  CHECK(kkt_residuals(pr, sol).pass);
  // Cone dual lives in the cone.
  const auto& lam = sol.soc_duals[0];
  CHECK(lam[0] >= lam.tail(2).norm() - 1e-9);
}

TEST_CASE("infeasible and unbounded classification") {
  SUBCASE("demand above capacity") {
    const Solution sol = solve(box_lp(200.0));
    CHECK(sol.status == SolveStatus::Infeasible);
  }
  SUBCASE("cost unbounded below") {
    ConicProgram pr;
    pr.num_vars = 1;
    pr.Q = MatrixXd::Zero(1, 1);
    pr.c = VectorXd::Constant(1, -1.0);
    pr.A = MatrixXd::Zero(0, 1);
    pr.b = VectorXd::Zero(0);
    pr.G = MatrixXd::Constant(1, 1, -1.0);
    pr.h = VectorXd::Zero(1);
    const Solution sol = solve(pr);
    CHECK(sol.status == SolveStatus::Unbounded);
  }
  SUBCASE("inconsistent equalities") {
    ConicProgram pr;
    pr.num_vars = 1;
    pr.Q = MatrixXd::Zero(1, 1);
    pr.c = VectorXd::Zero(1);
    pr.A = MatrixXd::Ones(2, 1);
    pr.b = VectorXd(2);
    pr.b << 1.0, 2.0;
    pr.G = MatrixXd::Zero(0, 1);
    pr.h = VectorXd::Zero(0);
    const Solution sol = solve(pr);
    CHECK(sol.status == SolveStatus::Infeasible);
  }
}

TEST_CASE("kkt certification is independent and detects tampering") {
  const Case c = builtin_case_study(4);
  const ConicProgram pr = build_program(c, FormulationKind::RiskTrading);
  const Solution sol = solve(pr);
  REQUIRE(sol.status == SolveStatus::Optimal);

  const KktReport ok = kkt_residuals(pr, sol);
  CHECK(ok.pass);
  CHECK(ok.stationarity_ok);
  CHECK(ok.primal_ok);
  CHECK(ok.dual_ok);
  CHECK(ok.complementarity_ok);

  SUBCASE("perturbing one dispatch variable breaks the certificate") {
    Solution tampered = sol;
    tampered.primal[pr.label("p_G[0]").index] += 0.1;
    const KktReport bad = kkt_residuals(pr, tampered);
    CHECK(!bad.pass);
  }

  SUBCASE("requires an optimal status") {
    Solution wrong = sol;
    wrong.status = SolveStatus::NumericalTrouble;
    CHECK_THROWS_AS(kkt_residuals(pr, wrong), std::invalid_argument);
  }
}

TEST_CASE("solution certificates across the study formulations") {
  const Case c = builtin_case_study(6);
  for (auto kind : {FormulationKind::RiskNeutral, FormulationKind::RiskAverse,
                    FormulationKind::RiskTrading}) {
    const ConicProgram pr = build_program(c, kind);
    const Solution sol = solve(pr);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.duality_gap) <= 1e-6 * (1.0 + std::abs(sol.objective_value)));
    CHECK(sol.primal_residual <= 1e-6);
    if (sol.ineq_duals.size() > 0) CHECK(sol.ineq_duals.minCoeff() >= -1e-8);
    CHECK(kkt_residuals(pr, sol).pass);
  }
}
