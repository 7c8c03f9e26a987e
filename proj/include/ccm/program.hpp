#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

// Solver-agnostic standard form:
//
//   minimize    0.5 x'Qx + c'x + c0
//   subject to  A x  = b                     (equalities)
//               G x <= h                     (componentwise inequalities)
//               E_j x + g_j  in  SOC(dim_j)  (second-order-cone blocks,
//                                             first component >= norm of rest)
//
// The Lagrangian convention used for every dual in this project is
//
//   L = 0.5 x'Qx + c'x + y'(Ax - b) + z'(Gx - h) - sum_j lambda_j'(E_j x + g_j)
//
// with z >= 0 and lambda_j in the (self-dual) second-order cone. Market
// prices are the negatives of the raw equality duals under this convention.

namespace ccm {

enum class LabelKind { Variable, EqRow, IneqRow, SocBlock };

struct LabelRef {
  LabelKind kind = LabelKind::Variable;
  int index = 0;

  bool operator==(const LabelRef&) const = default;
};

enum class FormulationKind { RiskNeutral, RiskAverse, RiskTrading };

std::string to_string(FormulationKind k);

/// Builder-facing metadata carried along with the assembled program so that
/// pricing and reporting do not have to re-derive coefficients.
struct ProgramMeta {
  FormulationKind kind = FormulationKind::RiskNeutral;
  int num_gens = 0;
  int num_res = 0;
  int num_nodes = 0;
  int num_events = 0;   // W, 0 unless risk trading
  int num_beliefs = 0;  // K, 0 for risk neutral
  int num_lines = 0;
  double z_g = 0.0;  // standard normal quantile at 1 - eps_g
  double z_f = 0.0;
  std::vector<int> gen_node;  // node index per generator
  std::vector<int> res_node;
  double total_forecast = 0.0;
  std::vector<double> breakpoints_mw;      // partition converted to MW
  Eigen::MatrixXd ptdf;                    // num_lines x num_nodes (may be 0x0)
  Eigen::MatrixXd event_probs;             // (num_gens*num_beliefs) x W, row i*K+k
  Eigen::MatrixXd sigma_agg;               // num_gens x num_beliefs, sigma_{i,k}
};

struct ConicProgram {
  int num_vars = 0;
  Eigen::MatrixXd Q;  // n x n, PSD
  Eigen::VectorXd c;
  double c0 = 0.0;

  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  struct SocBlock {
    Eigen::MatrixXd E;  // dim x n
    Eigen::VectorXd g;  // dim
  };
  std::vector<SocBlock> soc;

  std::map<std::string, LabelRef> labels;
  ProgramMeta meta;

  int num_eq() const { return static_cast<int>(A.rows()); }
  int num_ineq() const { return static_cast<int>(G.rows()); }

  const LabelRef& label(const std::string& name) const;
  bool has_label(const std::string& name) const { return labels.count(name) > 0; }

  /// Structural checks: dimensions agree, every label resolves, the label
  /// map is injective per target, and Q has no eigenvalue below -1e-9.
  /// Throws std::logic_error on violation.
  void validate() const;

  double objective_at(const Eigen::VectorXd& x) const;

  /// Plain-text dump (dimensions, dense triplets of Q/A/G, cone blocks and
  /// labels) for cross-solving outside this codebase. The format is
  /// documented in docs/file_formats.md.
  void dump(std::ostream& os) const;
};

}  // namespace ccm
