#include "ccm/report_io.hpp"

#include <cinttypes>
#include <cstdio>

#include "json.hpp"

namespace ccm {

using nlohmann::ordered_json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

ordered_json prices_json(const Case& c, const Prices& p) {
  ordered_json j;
  j["lambda_system"] = p.lambda_system;
  ordered_json lam = ordered_json::object();
  for (std::size_t n = 0; n < c.network.nodes.size(); ++n)
    lam[c.network.nodes[n].id] = p.lambda_node[static_cast<Eigen::Index>(n)];
  j["lambda"] = std::move(lam);
  ordered_json chi = ordered_json::object();
  for (std::size_t u = 0; u < c.res_units.size(); ++u)
    chi[c.res_units[u].id] = p.chi[static_cast<Eigen::Index>(u)];
  j["chi"] = std::move(chi);
  if (p.mu.size() > 0) j["mu"] = vec_json(p.mu);
  j["delta_hi"] = vec_json(p.delta_hi);
  j["delta_lo"] = vec_json(p.delta_lo);
  j["zeta"] = vec_json(p.zeta);
  if (p.eta.size() > 0) {
    ordered_json eta = ordered_json::array();
    for (Eigen::Index i = 0; i < p.eta.rows(); ++i) eta.push_back(vec_json(p.eta.row(i)));
    j["eta"] = std::move(eta);
  }
  if (p.theta_hi.size() > 0) {
    j["theta_hi"] = vec_json(p.theta_hi);
    j["theta_lo"] = vec_json(p.theta_lo);
  }
  return j;
}

ordered_json formula_json(const FormulaReport& rep) {
  ordered_json items = ordered_json::array();
  for (const auto& it : rep.items) {
    ordered_json o;
    o["name"] = it.name;
    o["residual"] = it.residual;
    o["threshold"] = it.threshold;
    o["pass"] = it.pass;
    if (it.skipped) o["skipped"] = true;
    if (!it.note.empty()) o["note"] = it.note;
    items.push_back(std::move(o));
  }
  ordered_json j;
  j["all_pass"] = rep.all_pass();
  j["items"] = std::move(items);
  return j;
}

ordered_json kkt_json(const KktReport& k) {
  ordered_json j;
  j["pass"] = k.pass;
  j["stationarity"] = k.stationarity;
  j["primal_feasibility"] = k.primal_feasibility;
  j["dual_feasibility"] = k.dual_feasibility;
  j["complementarity"] = k.complementarity;
  return j;
}

ordered_json outcome_json(const Case& c, const FormulationOutcome& out) {
  ordered_json j;
  j["formulation"] = to_string(out.kind);
  j["objective"] = out.objective;
  j["energy_cost"] = out.energy_cost;
  j["reserve_cost"] = out.reserve_cost;
  j["variance_cost_common"] = out.variance_cost_common;
  j["solver"] = {{"status", to_string(out.solution.status)},
                 {"iterations", out.solution.iterations},
                 {"duality_gap", out.solution.duality_gap},
                 {"message", out.solution.message}};
  ordered_json gens = ordered_json::array();
  for (const auto& g : out.generators) {
    ordered_json o;
    o["id"] = g.id;
    o["p_mw"] = g.p_mw;
    o["reserve_mw"] = g.reserve_mw;
    o["t"] = g.t;
    o["alpha"] = vec_json(g.alpha);
    if (g.trades.size() > 0) {
      o["trades"] = vec_json(g.trades);
      o["premium"] = g.premium;
    }
    gens.push_back(std::move(o));
  }
  j["generators"] = std::move(gens);
  j["prices"] = prices_json(c, out.prices);
  j["kkt"] = kkt_json(out.kkt);
  j["price_formulas"] = formula_json(out.formulas);
  return j;
}

ordered_json case_json_header(const Case& c) {
  ordered_json j;
  j["seed"] = c.meta.seed;
  j["generators"] = c.generators.size();
  j["res_units"] = c.res_units.size();
  j["total_demand_mw"] = c.total_demand();
  j["total_forecast_mw"] = c.total_forecast();
  j["eps_g"] = c.eps_g;
  j["eps_f"] = c.eps_f;
  j["events"] = c.partition.num_events();
  j["beliefs_per_producer"] = c.num_beliefs();
  return j;
}

}  // namespace

std::string comparison_report_to_json(const Case& c, const ComparisonReport& rep) {
  ordered_json j;
  j["case"] = case_json_header(c);
  j["cost_decomposition"] = ComparisonReport::kDecompositionNote;
  j["no_rt"] = outcome_json(c, rep.no_rt);
  j["rt"] = outcome_json(c, rep.rt);
  j["cost_reduction"] = rep.cost_reduction;
  j["clearing_residual"] = rep.clearing_residual;
  j["budget_residual"] = rep.budget_residual;
  ordered_json props = ordered_json::array();
  for (const auto& it : rep.propositions.items) {
    ordered_json o;
    o["name"] = it.name;
    o["residual"] = it.residual;
    o["threshold"] = it.threshold;
    o["pass"] = it.pass;
    if (!it.note.empty()) o["note"] = it.note;
    props.push_back(std::move(o));
  }
  j["propositions"] = {{"all_pass", rep.propositions.all_pass()}, {"items", std::move(props)}};
  return j.dump(2) + "\n";
}

std::string clearing_report_to_json(const Case& c, const FormulationOutcome& out) {
  ordered_json j;
  j["case"] = case_json_header(c);
  j["cost_decomposition"] = ComparisonReport::kDecompositionNote;
  j["result"] = outcome_json(c, out);
  return j.dump(2) + "\n";
}

void write_prices_csv(std::ostream& os, const Case& c, const Prices& p) {
  os << "kind,index,id,value\n";
  for (std::size_t n = 0; n < c.network.nodes.size(); ++n)
    os << "lambda," << n << "," << c.network.nodes[n].id << ","
       << fmt(p.lambda_node[static_cast<Eigen::Index>(n)]) << "\n";
  for (std::size_t u = 0; u < c.res_units.size(); ++u)
    os << "chi," << u << "," << c.res_units[u].id << ","
       << fmt(p.chi[static_cast<Eigen::Index>(u)]) << "\n";
  for (Eigen::Index w = 0; w < p.mu.size(); ++w)
    os << "mu," << w << ",event" << (w + 1) << "," << fmt(p.mu[w]) << "\n";
}

void write_dispatch_csv(std::ostream& os, const Case& c, const FormulationOutcome& out) {
  os << "generator,p_mw,reserve_mw,t,premium";
  for (const auto& u : c.res_units) os << ",alpha_" << u.id;
  os << "\n";
  for (const auto& g : out.generators) {
    os << g.id << "," << fmt(g.p_mw) << "," << fmt(g.reserve_mw) << "," << fmt(g.t) << ","
       << fmt(g.premium);
    for (Eigen::Index u = 0; u < g.alpha.size(); ++u) os << "," << fmt(g.alpha[u]);
    os << "\n";
  }
}

void write_participation_csv(std::ostream& os, const Case& c, const ComparisonReport& rep) {
  os << "generator,p_mw";
  for (const auto& u : c.res_units) os << ",alpha_rt_" << u.id;
  for (const auto& u : c.res_units) os << ",alpha_no_rt_" << u.id;
  os << "\n";
  for (std::size_t i = 0; i < rep.rt.generators.size(); ++i) {
    const auto& grt = rep.rt.generators[i];
    const auto& gra = rep.no_rt.generators[i];
    os << grt.id << "," << fmt(grt.p_mw);
    for (Eigen::Index u = 0; u < grt.alpha.size(); ++u) os << "," << fmt(grt.alpha[u]);
    for (Eigen::Index u = 0; u < gra.alpha.size(); ++u) os << "," << fmt(gra.alpha[u]);
    os << "\n";
  }
  os << "chi,";
  for (Eigen::Index u = 0; u < rep.rt.prices.chi.size(); ++u)
    os << "," << fmt(rep.rt.prices.chi[u]);
  for (Eigen::Index u = 0; u < rep.no_rt.prices.chi.size(); ++u)
    os << "," << fmt(rep.no_rt.prices.chi[u]);
  os << "\n";
}

void write_event_probability_csv(std::ostream& os, const Case& c,
                                 const ConicProgram& rt_program, const Prices& prices) {
  const auto& meta = rt_program.meta;
  os << "series";
  for (int w = 0; w < meta.num_events; ++w) {
    os << ",event" << (w + 1) << "[";
    const auto& bp = meta.breakpoints_mw;
    if (w == 0)
      os << "-inf.." << fmt(bp[0]);
    else if (w == meta.num_events - 1)
      os << fmt(bp[static_cast<std::size_t>(w - 1)]) << "..inf";
    else
      os << fmt(bp[static_cast<std::size_t>(w - 1)]) << ".."
         << fmt(bp[static_cast<std::size_t>(w)]);
    os << " MW]";
  }
  os << "\n";
  for (int i = 0; i < meta.num_gens; ++i)
    for (int k = 0; k < meta.num_beliefs; ++k) {
      os << "P_" << c.generators[static_cast<std::size_t>(i)].id << "_k" << k;
      for (int w = 0; w < meta.num_events; ++w)
        os << "," << fmt(meta.event_probs(i * meta.num_beliefs + k, w));
      os << "\n";
    }
  const auto common =
      event_probabilities(c.partition, aggregate_sigma(c.sigma_common), c.total_forecast());
  os << "P_common";
  for (double v : common) os << "," << fmt(v);
  os << "\nmu";
  for (Eigen::Index w = 0; w < prices.mu.size(); ++w) os << "," << fmt(prices.mu[w]);
  os << "\n";
}

void write_trades_csv(std::ostream& os, const Case& c, const FormulationOutcome& rt) {
  os << "producer";
  const int nw = rt.generators.empty() ? 0 : static_cast<int>(rt.generators[0].trades.size());
  for (int w = 0; w < nw; ++w) os << ",event" << (w + 1);
  os << "\n";
  for (std::size_t i = 0; i < rt.generators.size(); ++i) {
    os << c.generators[i].id;
    for (Eigen::Index w = 0; w < rt.generators[i].trades.size(); ++w)
      os << "," << fmt(rt.generators[i].trades[w]);
    os << "\n";
  }
}

}  // namespace ccm
