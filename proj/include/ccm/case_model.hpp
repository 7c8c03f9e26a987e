#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccm/stochastic.hpp"

// Domain model for a market instance: conventional generators with
// quadratic costs, stochastic RES units, an optional DC network, a common
// covariance belief plus per-producer risk sets, chance-constraint
// tolerances and the ADS event partition.

namespace ccm {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a case violates a model invariant; the message names the
/// offending entity.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Generator {
  std::string id;
  double c2 = 0.0;     // $/MW^2, convexity requires >= 0
  double c1 = 0.0;     // $/MW
  double c0 = 0.0;     // $
  double p_max = 0.0;  // MW
  double p_min = 0.0;  // MW
  std::string node;

  bool operator==(const Generator&) const = default;
};

struct ResUnit {
  std::string id;
  double forecast_mw = 0.0;  // >= 0
  std::string node;

  bool operator==(const ResUnit&) const = default;
};

struct NodeDemand {
  std::string id;
  double demand_mw = 0.0;

  bool operator==(const NodeDemand&) const = default;
};

struct Line {
  std::string from;
  std::string to;
  double reactance = 0.0;      // p.u., > 0
  double flow_limit_mw = 0.0;  // > 0

  bool operator==(const Line&) const = default;
};

/// DC network; an empty `lines` list denotes the uncongested copper plate.
struct Network {
  std::vector<NodeDemand> nodes;
  std::vector<Line> lines;
  std::string slack_node;

  int node_index(const std::string& id) const;  // -1 if unknown
  bool operator==(const Network&) const = default;
};

/// Finite covariance envelope of one producer's coherent risk measure.
struct RiskSet {
  std::string producer;
  std::vector<Eigen::MatrixXd> covariances;  // K symmetric PSD, |U| x |U|, MW^2

  bool operator==(const RiskSet& o) const;
};

struct CaseMeta {
  std::uint64_t seed = 0;
  std::string generator_name;  // RNG used to draw the risk sets, if any
  std::string description;

  bool operator==(const CaseMeta&) const = default;
};

struct Case {
  std::vector<Generator> generators;
  std::vector<ResUnit> res_units;
  Network network;
  Eigen::MatrixXd sigma_common;  // |U| x |U| PSD
  std::vector<RiskSet> risk_sets;
  double eps_g = 0.0;  // in (0,1)
  double eps_f = 0.0;  // in (0,1)
  EventPartition partition;
  bool require_common_membership = true;
  CaseMeta meta;

  double total_demand() const;
  double total_forecast() const;
  int num_gens() const { return static_cast<int>(generators.size()); }
  int num_res() const { return static_cast<int>(res_units.size()); }
  int num_beliefs() const {
    return risk_sets.empty() ? 0 : static_cast<int>(risk_sets[0].covariances.size());
  }

  /// Checks every model invariant; throws ValidationError naming the
  /// offending entity. Symmetrizes and PSD-clips covariances in place
  /// (eigenvalues in [-1e-9, 0) go to zero, below -1e-9 is rejected).
  void validate();

  bool operator==(const Case& o) const;
};

/// Parses and validates a case file (JSON, schema in docs/case_schema.json).
Case load_case(const std::string& path);

/// Serializes a case; load_case(save_case(c)) == c. Deterministic byte
/// output for equal cases.
void save_case(const Case& c, const std::string& path);
std::string case_to_json_string(const Case& c);
Case case_from_json_string(const std::string& text);

/// Five-producer study instance: c1 = {10,7,7,15,17} $/MW, c2 = 0.1*c1,
/// p_max = {30,10,10,25,25} MW, p_min = 0, 100 MW demand on one node,
/// five 5 MW RES units, K = 10 beliefs per producer (nine seeded-random
/// covariances with per-unit std in [0, 0.4*forecast] and one shared
/// pairwise correlation in [0, 0.5], plus the common matrix with std
/// 0.2*forecast and no correlation), breakpoints
/// {-0.2,-0.1,-0.05,0,0.05,0.1,0.2} as fractions of total forecast.
/// Pure function of the seed; draws come from mt19937_64.
Case builtin_case_study(std::uint64_t seed, double eps_g = 0.05,
                        double eps_f = 0.05);

}  // namespace ccm
