#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ccm/case_model.hpp"
#include "ccm/pricing.hpp"
#include "ccm/program.hpp"
#include "ccm/solver.hpp"

// End-to-end experiment driver: risk-averse clearing with and without ADS
// trading, cost decomposition, trade tabulation, proposition checks and a
// grid-search oracle for desk-scale instances.

namespace ccm {

/// Raised when a clearing solve inside the driver does not return OPTIMAL;
/// names the formulation and carries the solver diagnostic plus, for the
/// trading formulation, a belief-compatibility diagnosis.
struct SolveFailure : std::runtime_error {
  SolveFailure(FormulationKind k, std::string msg)
      : std::runtime_error("clearing solve failed (" + to_string(k) + "): " + std::move(msg)),
        kind(k) {}
  FormulationKind kind;
};

struct PropositionItem {
  std::string name;
  double residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

struct PropositionReport {
  std::vector<PropositionItem> items;
  bool all_pass() const;
};

/// Proposition suite on a risk-trading optimum:
///   P1: mu is a probability vector and every producer's eta-mixture of
///       event probabilities reproduces it;
///   P2: sum_i t_i equals the eta-weighted expected net cost identity, with
///       expectations in closed form;
///   P3: the closed-form price identities (families a, b, d of
///       check_price_formulas).
PropositionReport verify_propositions(const Case& c, const ConicProgram& program,
                                      const Solution& solution, const Prices& prices);

struct GeneratorOutcome {
  std::string id;
  double p_mw = 0.0;
  double reserve_mw = 0.0;  // z_{1-eps_g} * s_i
  double t = 0.0;           // epigraph value (0 for risk neutral)
  Eigen::VectorXd alpha;
  Eigen::VectorXd trades;   // minimum-norm ADS row; empty without trading
  double premium = 0.0;     // pi_{a_i} = sum_w mu_w a_{i,w}
};

struct FormulationOutcome {
  FormulationKind kind = FormulationKind::RiskAverse;
  double objective = 0.0;
  double energy_cost = 0.0;           // sum_i c_i(p_i)
  double reserve_cost = 0.0;          // sum_i (t_i - premium_i); see header note
  double variance_cost_common = 0.0;  // sum_i c2_i alpha_i' Sigma_common alpha_i
  std::vector<GeneratorOutcome> generators;
  Prices prices;
  KktReport kkt;
  FormulaReport formulas;
  Solution solution;
};

struct ComparisonReport {
  // Cost decomposition convention: energy cost is the scheduled production
  // cost sum_i c_i(p_{G,i}); the balancing reserve cost of producer i is
  // t_i minus its ADS premium (for the no-trading case simply t_i), so the
  // system reserve cost equals sum_i t_i whenever the trades clear. The
  // common-belief variance cost is reported alongside for reference.
  static constexpr const char* kDecompositionNote =
      "energy = sum_i c_i(p_i); reserve_i = t_i - sum_w mu_w a_{i,w}; "
      "variance_common = sum_i c2_i ||alpha_i' Sigma_common^(1/2)||^2";

  FormulationOutcome no_rt;  // risk averse
  FormulationOutcome rt;     // risk trading
  PropositionReport propositions;
  double cost_reduction = 0.0;       // (no_rt.objective - rt.objective) / |no_rt.objective|
  double clearing_residual = 0.0;    // max_w |sum_i a_{i,w}|
  double budget_residual = 0.0;      // |sum_i premium_i|
};

/// Solves one formulation and assembles its outcome (minimum-norm trades
/// applied when risk trading). Throws SolveFailure when not OPTIMAL.
FormulationOutcome run_clearing(const Case& c, FormulationKind kind);

/// Solves the risk-averse and risk-trading formulations (concurrently),
/// extracts prices, replaces the reported trades by the minimum-norm point
/// of the optimal-trade face, and runs every pricing/proposition check.
ComparisonReport run_comparison(const Case& c);

/// Minimum-Euclidean-norm ADS positions among the optimal solutions of the
/// trading program (objective pinned to the solved optimum within
/// 1e-8 relative). Returns a gens x W matrix.
Eigen::MatrixXd min_norm_trades(const Case& c, const ConicProgram& rt_program,
                                const Solution& rt_solution);

/// Checks whether the producers' discrete belief sets can support a common
/// risk measure: feasibility of eta >= 0, sum_k eta_{i,k} = 1, with all
/// producers' event-probability mixtures equal. Returns an explanation when
/// they cannot (the Prop. 2 non-disjointness hypothesis fails).
std::optional<std::string> diagnose_belief_disjointness(const Case& c);

struct OracleResult {
  double best_objective = std::numeric_limits<double>::infinity();
  bool found_feasible = false;
  long long evaluations = 0;
};

/// Independent grid-search oracle for desk-scale cases (at most 2
/// generators, exactly 1 RES unit, K <= 2, W <= 3, no network). Eliminates
/// the clearing equalities, sweeps the free coordinates with the given step
/// and returns the best feasible objective. The evaluation path shares no
/// code with the program builder or the solver. Throws std::invalid_argument
/// outside desk scale and std::length_error past the grid cap (5e7 points).
OracleResult brute_force_oracle(const Case& c, FormulationKind kind, double grid_step,
                                double trade_box = 25.0);

/// The oracle's own objective and feasibility evaluation for an arbitrary
/// candidate point (same closed forms the grid search uses).
double oracle_objective(const Case& c, FormulationKind kind, const Eigen::VectorXd& p,
                        const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& trades);
bool oracle_feasible(const Case& c, const Eigen::VectorXd& p, const Eigen::MatrixXd& alpha,
                     const Eigen::MatrixXd& trades, double tol);

}  // namespace ccm
