#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <vector>

#include "ccm/program.hpp"

// Primal-dual interior-point solver for the ConicProgram standard form,
// with Nesterov-Todd scaling over the nonnegative orthant and the
// second-order cones and a Mehrotra-style predictor-corrector step.
// Infeasible problems are classified through an elastic phase-1 solve;
// kkt_residuals() re-derives every optimality residual from the program
// data alone so that a returned certificate never relies on the solver's
// internal bookkeeping.

namespace ccm {

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalTrouble };

std::string to_string(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::NumericalTrouble;
  Eigen::VectorXd primal;
  Eigen::VectorXd eq_duals;                 // y, free sign
  Eigen::VectorXd ineq_duals;               // z >= 0
  std::vector<Eigen::VectorXd> soc_duals;   // lambda_j in SOC
  double objective_value = 0.0;

  // Diagnostics from the final accepted iterate.
  int iterations = 0;
  double primal_residual = 0.0;  // max relative eq/ineq violation
  double dual_residual = 0.0;
  double duality_gap = 0.0;      // primal minus dual objective
  std::string message;

  double dual_objective_value = 0.0;
};

struct SolveOptions {
  // Tolerances may only be tightened below these defaults.
  double feas_tol = 1e-9;
  double abs_gap_tol = 1e-9;
  double rel_gap_tol = 1e-9;
  int max_iter = 100;
  std::ostream* trace = nullptr;  // per-iteration log when set
};

Solution solve(const ConicProgram& program, const SolveOptions& opts = {});

/// Independent optimality certificate computed from the program data and a
/// candidate solution: stationarity of the Lagrangian, primal and dual
/// feasibility, and complementary slackness (including the cone pairings
/// lambda'(Ex+g)). Thresholds are 1e-5 * (1 + scale) with the scale of each
/// family recorded in the report.
struct KktReport {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;
  double stationarity_scale = 1.0;
  double primal_scale = 1.0;
  double dual_scale = 1.0;
  double complementarity_scale = 1.0;
  bool stationarity_ok = false;
  bool primal_ok = false;
  bool dual_ok = false;
  bool complementarity_ok = false;
  bool pass = false;
};

KktReport kkt_residuals(const ConicProgram& program, const Solution& solution,
                        double tol = 1e-5);

}  // namespace ccm
