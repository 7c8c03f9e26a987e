#include "ccm/case_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ccm {

using nlohmann::ordered_json;

int Network::node_index(const std::string& id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return static_cast<int>(i);
  return -1;
}

bool RiskSet::operator==(const RiskSet& o) const {
  if (producer != o.producer || covariances.size() != o.covariances.size())
    return false;
  for (std::size_t k = 0; k < covariances.size(); ++k)
    if (covariances[k] != o.covariances[k]) return false;
  return true;
}

bool Case::operator==(const Case& o) const {
  return generators == o.generators && res_units == o.res_units &&
         network == o.network && sigma_common == o.sigma_common &&
         risk_sets == o.risk_sets && eps_g == o.eps_g && eps_f == o.eps_f &&
         partition == o.partition &&
         require_common_membership == o.require_common_membership &&
         meta == o.meta;
}

double Case::total_demand() const {
  double d = 0.0;
  for (const auto& n : network.nodes) d += n.demand_mw;
  return d;
}

double Case::total_forecast() const {
  double f = 0.0;
  for (const auto& u : res_units) f += u.forecast_mw;
  return f;
}

namespace {

/// Symmetrizes within tolerance and clips eigenvalues in [-1e-9, 0) to
/// zero. Throws ValidationError mentioning `what` otherwise.
Eigen::MatrixXd repair_psd(Eigen::MatrixXd m, const std::string& what) {
  if (m.rows() != m.cols())
    throw ValidationError(what + ": covariance matrix must be square");
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9)
    throw ValidationError(what + ": covariance matrix is not symmetric (max asymmetry " +
                          std::to_string(asym) + ")");
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  bool clipped = false;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-9 * scale)
      throw ValidationError(what + ": covariance matrix is not PSD (eigenvalue " +
                            std::to_string(ev[i]) + ")");
    if (ev[i] < 0.0) {
      ev[i] = 0.0;
      clipped = true;
    }
  }
  if (!clipped) return m;
  Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (r + r.transpose());
}

void check_connected(const Network& net) {
  if (net.lines.empty()) return;
  std::vector<std::vector<int>> adj(net.nodes.size());
  for (const auto& l : net.lines) {
    const int a = net.node_index(l.from);
    const int b = net.node_index(l.to);
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<bool> seen(net.nodes.size(), false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : adj[static_cast<std::size_t>(v)])
      if (!seen[static_cast<std::size_t>(w)]) {
        seen[static_cast<std::size_t>(w)] = true;
        q.push(w);
      }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw ValidationError("network: node '" + net.nodes[i].id +
                            "' is not connected to the rest of the grid");
}

}  // namespace

void Case::validate() {
  if (generators.empty()) throw ValidationError("case: no generators");
  if (network.nodes.empty()) throw ValidationError("network: no nodes");

  std::set<std::string> node_ids;
  for (const auto& n : network.nodes)
    if (!node_ids.insert(n.id).second)
      throw ValidationError("network: duplicate node id '" + n.id + "'");
  if (network.node_index(network.slack_node) < 0)
    throw ValidationError("network: slack node '" + network.slack_node + "' is not a node");

  std::set<std::string> gen_ids;
  for (const auto& g : generators) {
    if (!gen_ids.insert(g.id).second)
      throw ValidationError("generator '" + g.id + "': duplicate id");
    if (g.p_min > g.p_max)
      throw ValidationError("generator '" + g.id + "': p_min " + std::to_string(g.p_min) +
                            " exceeds p_max " + std::to_string(g.p_max));
    if (g.c2 < 0.0)
      throw ValidationError("generator '" + g.id + "': c2 must be nonnegative");
    if (network.node_index(g.node) < 0)
      throw ValidationError("generator '" + g.id + "': unknown node '" + g.node + "'");
  }
  std::set<std::string> res_ids;
  for (const auto& u : res_units) {
    if (!res_ids.insert(u.id).second)
      throw ValidationError("res unit '" + u.id + "': duplicate id");
    if (u.forecast_mw < 0.0)
      throw ValidationError("res unit '" + u.id + "': negative forecast");
    if (network.node_index(u.node) < 0)
      throw ValidationError("res unit '" + u.id + "': unknown node '" + u.node + "'");
  }
  for (const auto& l : network.lines) {
    if (network.node_index(l.from) < 0 || network.node_index(l.to) < 0)
      throw ValidationError("line " + l.from + "-" + l.to + ": unknown endpoint");
    if (!(l.flow_limit_mw > 0.0))
      throw ValidationError("line " + l.from + "-" + l.to + ": flow limit must be positive");
    if (!(l.reactance > 0.0))
      throw ValidationError("line " + l.from + "-" + l.to + ": reactance must be positive");
  }
  check_connected(network);

  if (!(eps_g > 0.0 && eps_g < 1.0))
    throw ValidationError("case: eps_g must lie in (0,1)");
  if (!(eps_f > 0.0 && eps_f < 1.0))
    throw ValidationError("case: eps_f must lie in (0,1)");
  partition.validate();

  const int nu = num_res();
  if (sigma_common.rows() != nu || sigma_common.cols() != nu)
    throw ValidationError("case: sigma_common must be " + std::to_string(nu) + "x" +
                          std::to_string(nu));
  sigma_common = repair_psd(sigma_common, "sigma_common");

  if (risk_sets.size() != generators.size())
    throw ValidationError("case: need exactly one risk set per generator");
  std::set<std::string> covered;
  int k_count = -1;
  for (auto& rs : risk_sets) {
    if (!gen_ids.count(rs.producer))
      throw ValidationError("risk set '" + rs.producer + "': unknown producer");
    if (!covered.insert(rs.producer).second)
      throw ValidationError("risk set '" + rs.producer + "': duplicate producer");
    if (rs.covariances.empty())
      throw ValidationError("risk set '" + rs.producer + "': needs K >= 1 covariances");
    if (k_count < 0) k_count = static_cast<int>(rs.covariances.size());
    if (static_cast<int>(rs.covariances.size()) != k_count)
      throw ValidationError("risk set '" + rs.producer +
                            "': K must be identical across producers");
    bool has_common = false;
    for (std::size_t k = 0; k < rs.covariances.size(); ++k) {
      auto& cov = rs.covariances[k];
      if (cov.rows() != nu || cov.cols() != nu)
        throw ValidationError("risk set '" + rs.producer + "': covariance " +
                              std::to_string(k) + " has wrong dimensions");
      cov = repair_psd(cov, "risk set '" + rs.producer + "', covariance " +
                                std::to_string(k));
      if ((cov - sigma_common).cwiseAbs().maxCoeff() <= 1e-9) has_common = true;
    }
    if (require_common_membership && !has_common)
      throw ValidationError("risk set '" + rs.producer +
                            "': sigma_common is not a member of the covariance set");
  }

  double cap = total_forecast();
  for (const auto& g : generators) cap += g.p_max;
  if (total_demand() > cap)
    throw ValidationError("case: total demand " + std::to_string(total_demand()) +
                          " MW exceeds total capacity plus forecast " +
                          std::to_string(cap) + " MW");
}

// ---------------------------------------------------------------------------
// JSON serialization

namespace {

ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const ordered_json& j, const std::string& what) {
  if (!j.is_array() || j.empty())
    throw ParseError(what + ": expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw ParseError(what + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i),
                                             static_cast<Eigen::Index>(c)) =
        j[i][c].get<double>();
  }
  return m;
}

std::string unit_to_string(PartitionUnit u) {
  switch (u) {
    case PartitionUnit::FractionOfTotalForecast: return "fraction_of_total_forecast";
    case PartitionUnit::Mw: return "mw";
    case PartitionUnit::FractionOfSigma: return "fraction_of_sigma";
  }
  return "fraction_of_total_forecast";
}

PartitionUnit unit_from_string(const std::string& s) {
  if (s == "fraction_of_total_forecast") return PartitionUnit::FractionOfTotalForecast;
  if (s == "mw") return PartitionUnit::Mw;
  if (s == "fraction_of_sigma") return PartitionUnit::FractionOfSigma;
  throw ParseError("partition: unknown unit '" + s + "'");
}

}  // namespace

std::string case_to_json_string(const Case& c) {
  ordered_json j;
  j["meta"] = {{"seed", c.meta.seed},
               {"generator", c.meta.generator_name},
               {"description", c.meta.description}};
  j["generators"] = ordered_json::array();
  for (const auto& g : c.generators)
    j["generators"].push_back({{"id", g.id},
                               {"c2", g.c2},
                               {"c1", g.c1},
                               {"c0", g.c0},
                               {"p_max", g.p_max},
                               {"p_min", g.p_min},
                               {"node", g.node}});
  j["res_units"] = ordered_json::array();
  for (const auto& u : c.res_units)
    j["res_units"].push_back(
        {{"id", u.id}, {"forecast_mw", u.forecast_mw}, {"node", u.node}});
  ordered_json nodes = ordered_json::array();
  for (const auto& n : c.network.nodes)
    nodes.push_back({{"id", n.id}, {"demand_mw", n.demand_mw}});
  ordered_json lines = ordered_json::array();
  for (const auto& l : c.network.lines)
    lines.push_back({{"from", l.from},
                     {"to", l.to},
                     {"reactance", l.reactance},
                     {"flow_limit_mw", l.flow_limit_mw}});
  j["network"] = {{"nodes", std::move(nodes)},
                  {"lines", std::move(lines)},
                  {"slack_node", c.network.slack_node}};
  j["sigma_common"] = matrix_to_json(c.sigma_common);
  j["risk_sets"] = ordered_json::array();
  for (const auto& rs : c.risk_sets) {
    ordered_json covs = ordered_json::array();
    for (const auto& cov : rs.covariances) covs.push_back(matrix_to_json(cov));
    j["risk_sets"].push_back({{"producer", rs.producer}, {"covariances", std::move(covs)}});
  }
  j["eps_g"] = c.eps_g;
  j["eps_f"] = c.eps_f;
  j["partition"] = {{"breakpoints", c.partition.breakpoints},
                    {"unit", unit_to_string(c.partition.unit)}};
  j["require_common_membership"] = c.require_common_membership;
  return j.dump(2) + "\n";
}

Case case_from_json_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("case file is not valid JSON: ") + e.what());
  }
  Case c;
  try {
    if (j.contains("meta")) {
      c.meta.seed = j["meta"].value("seed", std::uint64_t{0});
      c.meta.generator_name = j["meta"].value("generator", std::string{});
      c.meta.description = j["meta"].value("description", std::string{});
    }
    for (const auto& g : j.at("generators"))
      c.generators.push_back({g.at("id").get<std::string>(), g.at("c2").get<double>(),
                              g.at("c1").get<double>(), g.value("c0", 0.0),
                              g.at("p_max").get<double>(), g.at("p_min").get<double>(),
                              g.at("node").get<std::string>()});
    for (const auto& u : j.at("res_units"))
      c.res_units.push_back({u.at("id").get<std::string>(),
                             u.at("forecast_mw").get<double>(),
                             u.at("node").get<std::string>()});
    const auto& net = j.at("network");
    for (const auto& n : net.at("nodes"))
      c.network.nodes.push_back(
          {n.at("id").get<std::string>(), n.at("demand_mw").get<double>()});
    for (const auto& l : net.value("lines", ordered_json::array()))
      c.network.lines.push_back({l.at("from").get<std::string>(),
                                 l.at("to").get<std::string>(),
                                 l.at("reactance").get<double>(),
                                 l.at("flow_limit_mw").get<double>()});
    c.network.slack_node = net.at("slack_node").get<std::string>();
    c.sigma_common = matrix_from_json(j.at("sigma_common"), "sigma_common");
    for (const auto& rs : j.at("risk_sets")) {
      RiskSet r;
      r.producer = rs.at("producer").get<std::string>();
      for (const auto& cov : rs.at("covariances"))
        r.covariances.push_back(matrix_from_json(cov, "risk set " + r.producer));
      c.risk_sets.push_back(std::move(r));
    }
    c.eps_g = j.at("eps_g").get<double>();
    c.eps_f = j.at("eps_f").get<double>();
    c.partition.breakpoints = j.at("partition").at("breakpoints").get<std::vector<double>>();
    c.partition.unit =
        unit_from_string(j.at("partition").value("unit", "fraction_of_total_forecast"));
    c.require_common_membership = j.value("require_common_membership", true);
  } catch (const ordered_json::exception& e) {
    throw ParseError(std::string("case file is missing or mistypes a field: ") + e.what());
  }
  c.validate();
  return c;
}

Case load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return case_from_json_string(ss.str());
}

void save_case(const Case& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write case file '" + path + "'");
  out << case_to_json_string(c);
}

// ---------------------------------------------------------------------------
// Builtin study instance

Case builtin_case_study(std::uint64_t seed, double eps_g, double eps_f) {
  Case c;
  c.meta.seed = seed;
  c.meta.generator_name = "mt19937_64";
  c.meta.description =
      "five-producer study case; per producer: nine random covariances "
      "(per-unit std U[0,0.4*forecast], shared pairwise correlation U[0,0.5]) "
      "plus the common no-correlation matrix with std 0.2*forecast";

  const std::vector<double> c1 = {10.0, 7.0, 7.0, 15.0, 17.0};
  const std::vector<double> p_max = {30.0, 10.0, 10.0, 25.0, 25.0};
  c.network.nodes = {{"n1", 100.0}};
  c.network.slack_node = "n1";
  for (int i = 0; i < 5; ++i) {
    Generator g;
    g.id = "g" + std::to_string(i + 1);
    g.c1 = c1[static_cast<std::size_t>(i)];
    g.c2 = 0.1 * g.c1;
    g.c0 = 0.0;
    g.p_max = p_max[static_cast<std::size_t>(i)];
    g.p_min = 0.0;
    g.node = "n1";
    c.generators.push_back(g);
  }
  const int nu = 5;
  for (int u = 0; u < nu; ++u)
    c.res_units.push_back({"u" + std::to_string(u + 1), 5.0, "n1"});

  Eigen::VectorXd common_std(nu);
  for (int u = 0; u < nu; ++u) common_std[u] = 0.2 * 5.0;
  c.sigma_common = common_std.cwiseProduct(common_std).asDiagonal();

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    const double u01 = static_cast<double>(rng() >> 11) * 0x1p-53;
    return lo + (hi - lo) * u01;
  };

  const int k_random = 9;  // K = 10 with the common matrix appended
  for (const auto& g : c.generators) {
    RiskSet rs;
    rs.producer = g.id;
    for (int k = 0; k < k_random; ++k) {
      Eigen::VectorXd stds(nu);
      for (int u = 0; u < nu; ++u)
        stds[u] = uniform(0.0, 0.4 * c.res_units[static_cast<std::size_t>(u)].forecast_mw);
      const double rho = uniform(0.0, 0.5);
      Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(nu, nu, rho);
      corr.diagonal().setOnes();
      Eigen::MatrixXd cov = stds.asDiagonal() * corr * stds.asDiagonal();
      rs.covariances.push_back(0.5 * (cov + cov.transpose()));
    }
    rs.covariances.push_back(c.sigma_common);
    c.risk_sets.push_back(std::move(rs));
  }

  c.eps_g = eps_g;
  c.eps_f = eps_f;
  c.partition.breakpoints = {-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2};
  c.partition.unit = PartitionUnit::FractionOfTotalForecast;
  c.validate();
  return c;
}

}  // namespace ccm
