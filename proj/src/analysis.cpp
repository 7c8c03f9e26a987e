#include "ccm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>

#include "ccm/builder.hpp"

namespace ccm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

bool PropositionReport::all_pass() const {
  for (const auto& it : items)
    if (!it.pass) return false;
  return true;
}

namespace {

MatrixXd primal_alpha(const ConicProgram& pr, const Solution& sol) {
  const int ng = pr.meta.num_gens, nu = pr.meta.num_res;
  MatrixXd alpha(ng, nu);
  for (int i = 0; i < ng; ++i)
    for (int u = 0; u < nu; ++u)
      alpha(i, u) = sol.primal[pr.label("alpha[" + std::to_string(i) + "][" +
                                        std::to_string(u) + "]")
                                   .index];
  return alpha;
}

MatrixXd primal_trades(const ConicProgram& pr, const Solution& sol) {
  const int ng = pr.meta.num_gens, nw = pr.meta.num_events;
  MatrixXd a = MatrixXd::Zero(ng, nw);
  for (int i = 0; i < ng; ++i)
    for (int w = 0; w < nw; ++w)
      a(i, w) =
          sol.primal[pr.label("a[" + std::to_string(i) + "][" + std::to_string(w) + "]").index];
  return a;
}

}  // namespace

PropositionReport verify_propositions(const Case& c, const ConicProgram& program,
                                      const Solution& solution, const Prices& prices) {
  if (solution.status != SolveStatus::Optimal)
    throw std::invalid_argument("verify_propositions: solution is not OPTIMAL");
  if (program.meta.num_events == 0)
    throw std::invalid_argument("verify_propositions: needs a risk-trading solution");
  const auto& meta = program.meta;
  const int ng = meta.num_gens, nk = meta.num_beliefs, nw = meta.num_events;

  PropositionReport rep;
  auto add = [&rep](const std::string& name, double residual, double threshold,
                    const std::string& note = "") {
    rep.items.push_back(
        {name, residual, threshold, std::abs(residual) <= threshold, note});
  };

  // P1: mu is a probability vector ...
  add("p1_mu_nonnegative", std::min(0.0, prices.mu.minCoeff()), 1e-8);
  add("p1_mu_sums_to_one", prices.mu.sum() - 1.0, 1e-6);
  // ... reproduced by every producer's eta-mixture.
  for (int i = 0; i < ng; ++i) {
    double worst = 0.0;
    for (int w = 0; w < nw; ++w) {
      double mix = 0.0;
      for (int k = 0; k < nk; ++k) mix += prices.eta(i, k) * meta.event_probs(i * nk + k, w);
      worst = std::max(worst, std::abs(prices.mu[w] - mix));
    }
    add("p1_shared_measure[" + std::to_string(i) + "]", worst, 1e-5,
        "fails when the producers' risk sets are disjoint (Prop. 2 hypothesis)");
  }

  // P2: sum_i t_i equals the eta-weighted expected net cost, expectations
  // in closed form: E_k[c_i] = c_i(p_i) + c2_i alpha_i' Sigma_k alpha_i and
  // E_k[a_i] = sum_w a_{i,w} P_w(sigma_ik).
  const MatrixXd alpha = primal_alpha(program, solution);
  const MatrixXd trades = primal_trades(program, solution);
  double t_sum = 0.0, identity = 0.0;
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    const double pg = solution.primal[program.label("p_G[" + std::to_string(i) + "]").index];
    t_sum += solution.primal[program.label("t[" + std::to_string(i) + "]").index];
    const double base_cost = g.c2 * pg * pg + g.c1 * pg + g.c0;
    for (int k = 0; k < nk; ++k) {
      const MatrixXd& sk =
          c.risk_sets[static_cast<std::size_t>(i)].covariances[static_cast<std::size_t>(k)];
      double exp_cost = base_cost + g.c2 * alpha.row(i) * sk * alpha.row(i).transpose();
      double exp_payout = 0.0;
      for (int w = 0; w < nw; ++w) exp_payout += trades(i, w) * meta.event_probs(i * nk + k, w);
      identity += prices.eta(i, k) * (exp_cost - exp_payout);
    }
    identity -= base_cost;  // Eq. keeps only the balancing part on both sides
  }
  add("p2_worst_case_cost", t_sum - identity, 1e-5 * (1.0 + std::abs(t_sum)));

  // P3: closed-form price identities.
  const FormulaReport formulas = check_price_formulas(c, program, solution, prices);
  for (const auto& it : formulas.items) {
    if (it.skipped) continue;
    add("p3_" + it.name, it.residual, it.threshold, it.note);
  }
  return rep;
}

MatrixXd min_norm_trades(const Case& c, const ConicProgram& rt_program,
                         const Solution& rt_solution) {
  const auto& meta = rt_program.meta;
  const int n = rt_program.num_vars;
  const int ng = meta.num_gens, nw = meta.num_events;

  ConicProgram pin = rt_program;
  pin.Q = MatrixXd::Zero(n, n);
  pin.c = VectorXd::Zero(n);
  pin.c0 = 0.0;
  for (int i = 0; i < ng; ++i)
    for (int w = 0; w < nw; ++w) {
      const int v = rt_program.label("a[" + std::to_string(i) + "][" + std::to_string(w) + "]").index;
      pin.Q(v, v) = 2.0;
    }

  // Pin the original objective: 0.5 x'Q0 x <= bound - c0'x as a cone block
  // (the quadratic part is separable in p, so the lift stays small).
  const double bound = (rt_solution.objective_value - rt_program.c0) +
                       1e-8 * (1.0 + std::abs(rt_solution.objective_value));
  ConicProgram::SocBlock blk;
  blk.E = MatrixXd::Zero(ng + 2, n);
  blk.g = VectorXd::Zero(ng + 2);
  blk.E.row(0) = -rt_program.c.transpose();
  blk.g[0] = bound + 1.0;
  blk.E.row(ng + 1) = -rt_program.c.transpose();
  blk.g[ng + 1] = bound - 1.0;
  for (int i = 0; i < ng; ++i) {
    const int v = rt_program.label("p_G[" + std::to_string(i) + "]").index;
    blk.E(1 + i, v) = 2.0 * std::sqrt(c.generators[static_cast<std::size_t>(i)].c2);
  }
  pin.labels["objective_pin"] = {LabelKind::SocBlock, static_cast<int>(pin.soc.size())};
  pin.soc.push_back(std::move(blk));

  const Solution sel = solve(pin);
  if (sel.status != SolveStatus::Optimal) return primal_trades(rt_program, rt_solution);
  return primal_trades(rt_program, sel);
}

std::optional<std::string> diagnose_belief_disjointness(const Case& c) {
  const int ng = c.num_gens(), nk = c.num_beliefs();
  const int nw = c.partition.num_events();
  const double total_forecast = c.total_forecast();

  MatrixXd probs(ng * nk, nw);
  for (int i = 0; i < ng; ++i)
    for (int k = 0; k < nk; ++k) {
      const auto pw = event_probabilities(
          c.partition,
          aggregate_sigma(
              c.risk_sets[static_cast<std::size_t>(i)].covariances[static_cast<std::size_t>(k)]),
          total_forecast);
      for (int w = 0; w < nw; ++w) probs(i * nk + k, w) = pw[static_cast<std::size_t>(w)];
    }

  // Feasibility: eta >= 0, sum_k eta_{i,k} = 1, all producers' mixtures of
  // event probabilities agree with producer 0's.
  ConicProgram lp;
  lp.num_vars = ng * nk;
  lp.Q = MatrixXd::Zero(lp.num_vars, lp.num_vars);
  lp.c = VectorXd::Zero(lp.num_vars);
  lp.A = MatrixXd::Zero(ng + (ng - 1) * nw, lp.num_vars);
  lp.b = VectorXd::Zero(lp.A.rows());
  for (int i = 0; i < ng; ++i) {
    for (int k = 0; k < nk; ++k) lp.A(i, i * nk + k) = 1.0;
    lp.b[i] = 1.0;
  }
  for (int i = 1; i < ng; ++i)
    for (int w = 0; w < nw; ++w) {
      const int row = ng + (i - 1) * nw + w;
      for (int k = 0; k < nk; ++k) {
        lp.A(row, k) = probs(k, w);
        lp.A(row, i * nk + k) = -probs(i * nk + k, w);
      }
    }
  lp.G = -MatrixXd::Identity(lp.num_vars, lp.num_vars);
  lp.h = VectorXd::Zero(lp.num_vars);

  const Solution sol = solve(lp);
  if (sol.status == SolveStatus::Infeasible)
    return "no common probability measure exists over the ADS events: the discrete "
           "belief sets are disjoint, violating the non-disjointness hypothesis of the "
           "worst-case-measure proposition";
  return std::nullopt;
}

namespace {

FormulationOutcome make_outcome(const Case& c, const ConicProgram& pr, Solution sol,
                                const MatrixXd* trades) {
  const auto& meta = pr.meta;
  FormulationOutcome out;
  out.kind = meta.kind;
  out.objective = sol.objective_value;
  out.kkt = kkt_residuals(pr, sol);
  out.prices = extract_prices(pr, sol);
  out.formulas = check_price_formulas(c, pr, sol, out.prices);

  const MatrixXd alpha = primal_alpha(pr, sol);
  for (int i = 0; i < meta.num_gens; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    GeneratorOutcome go;
    go.id = g.id;
    go.p_mw = sol.primal[pr.label("p_G[" + std::to_string(i) + "]").index];
    go.reserve_mw = meta.z_g * sol.primal[pr.label("s[" + std::to_string(i) + "]").index];
    go.alpha = alpha.row(i);
    if (meta.num_beliefs > 0)
      go.t = sol.primal[pr.label("t[" + std::to_string(i) + "]").index];
    if (trades) {
      go.trades = trades->row(i);
      go.premium = out.prices.mu.dot(go.trades);
    }
    out.energy_cost += g.c2 * go.p_mw * go.p_mw + g.c1 * go.p_mw + g.c0;
    out.reserve_cost += go.t - go.premium;
    out.variance_cost_common += g.c2 * alpha.row(i) * c.sigma_common * alpha.row(i).transpose();
    out.generators.push_back(std::move(go));
  }
  out.solution = std::move(sol);
  return out;
}

}  // namespace

FormulationOutcome run_clearing(const Case& c, FormulationKind kind) {
  const ConicProgram pr = build_program(c, kind);
  Solution sol = solve(pr);
  if (sol.status != SolveStatus::Optimal) {
    std::string msg = sol.message;
    if (kind == FormulationKind::RiskTrading)
      if (auto diag = diagnose_belief_disjointness(c)) msg += "; " + *diag;
    throw SolveFailure(kind, msg);
  }
  if (kind == FormulationKind::RiskTrading) {
    const MatrixXd trades = min_norm_trades(c, pr, sol);
    return make_outcome(c, pr, std::move(sol), &trades);
  }
  return make_outcome(c, pr, std::move(sol), nullptr);
}

ComparisonReport run_comparison(const Case& c) {
  const ConicProgram pr_ra = build_program(c, FormulationKind::RiskAverse);
  const ConicProgram pr_rt = build_program(c, FormulationKind::RiskTrading);

  auto fut_ra = std::async(std::launch::async, [&] { return solve(pr_ra); });
  Solution sol_rt = solve(pr_rt);
  Solution sol_ra = fut_ra.get();

  if (sol_ra.status != SolveStatus::Optimal)
    throw SolveFailure(FormulationKind::RiskAverse, sol_ra.message);
  if (sol_rt.status != SolveStatus::Optimal) {
    std::string msg = sol_rt.message;
    if (auto diag = diagnose_belief_disjointness(c)) msg += "; " + *diag;
    throw SolveFailure(FormulationKind::RiskTrading, msg);
  }

  ComparisonReport rep;
  const MatrixXd trades = min_norm_trades(c, pr_rt, sol_rt);
  rep.no_rt = make_outcome(c, pr_ra, std::move(sol_ra), nullptr);
  rep.rt = make_outcome(c, pr_rt, std::move(sol_rt), &trades);
  rep.propositions = verify_propositions(c, pr_rt, rep.rt.solution, rep.rt.prices);
  rep.cost_reduction =
      (rep.no_rt.objective - rep.rt.objective) / std::max(1e-12, std::abs(rep.no_rt.objective));
  rep.clearing_residual = trades.colwise().sum().cwiseAbs().maxCoeff();
  double budget = 0.0;
  for (const auto& g : rep.rt.generators) budget += g.premium;
  rep.budget_residual = std::abs(budget);
  return rep;
}

// ---------------------------------------------------------------------------
// Desk-scale oracle. Everything below evaluates the market model directly
// from the case data; it deliberately shares no code with build_program.

double oracle_objective(const Case& c, FormulationKind kind, const VectorXd& p,
                        const MatrixXd& alpha, const MatrixXd& trades) {
  const int ng = c.num_gens();
  const int nk = c.num_beliefs();
  const double total_forecast = c.total_forecast();
  double obj = 0.0;
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    obj += g.c2 * p[i] * p[i] + g.c1 * p[i] + g.c0;
    if (kind == FormulationKind::RiskNeutral) {
      obj += g.c2 * alpha.row(i) * c.sigma_common * alpha.row(i).transpose();
      continue;
    }
    double worst = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < nk; ++k) {
      const MatrixXd& sk =
          c.risk_sets[static_cast<std::size_t>(i)].covariances[static_cast<std::size_t>(k)];
      double v = g.c2 * alpha.row(i) * sk * alpha.row(i).transpose();
      if (kind == FormulationKind::RiskTrading) {
        const auto pw = event_probabilities(c.partition, aggregate_sigma(sk), total_forecast);
        for (int w = 0; w < c.partition.num_events(); ++w)
          v += trades(i, w) * pw[static_cast<std::size_t>(w)];
      }
      worst = std::max(worst, v);
    }
    obj += worst;
  }
  return obj;
}

bool oracle_feasible(const Case& c, const VectorXd& p, const MatrixXd& alpha,
                     const MatrixXd& trades, double tol) {
  const int ng = c.num_gens();
  const int nu = c.num_res();
  const double z_g = std_normal_quantile(1.0 - c.eps_g);
  if (std::abs(p.sum() - (c.total_demand() - c.total_forecast())) > tol) return false;
  for (int u = 0; u < nu; ++u)
    if (std::abs(alpha.col(u).sum() - 1.0) > tol) return false;
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    for (int u = 0; u < nu; ++u)
      if (alpha(i, u) < -tol || alpha(i, u) > 1.0 + tol) return false;
    const double s =
        std::sqrt(std::max(alpha.row(i) * c.sigma_common * alpha.row(i).transpose(), 0.0));
    if (p[i] + z_g * s > g.p_max + tol) return false;
    if (-p[i] + z_g * s > -g.p_min + tol) return false;
  }
  if (trades.size() > 0)
    for (int w = 0; w < trades.cols(); ++w)
      if (std::abs(trades.col(w).sum()) > tol) return false;
  return true;
}

OracleResult brute_force_oracle(const Case& c, FormulationKind kind, double grid_step,
                                double trade_box) {
  const int ng = c.num_gens();
  const int nw = c.partition.num_events();
  if (ng > 2 || c.num_res() != 1 || c.num_beliefs() > 2 || nw > 3 ||
      !c.network.lines.empty())
    throw std::invalid_argument("brute_force_oracle: case is beyond desk scale");
  if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_oracle: bad grid step");

  const double residual_load = c.total_demand() - c.total_forecast();
  const bool trading = kind == FormulationKind::RiskTrading;

  // Eliminated coordinates: p2 = load - p1, alpha2 = 1 - alpha1,
  // a_2w = -a_1w. With one generator everything is pinned.
  const auto& g1 = c.generators[0];
  double p_lo = g1.p_min, p_hi = g1.p_max;
  if (ng == 2) {
    p_lo = std::max(p_lo, residual_load - c.generators[1].p_max);
    p_hi = std::min(p_hi, residual_load - c.generators[1].p_min);
  } else {
    p_lo = p_hi = residual_load;
  }

  const long long np = p_hi >= p_lo ? static_cast<long long>((p_hi - p_lo) / grid_step) + 1 : 0;
  const long long na = ng == 2 ? static_cast<long long>(1.0 / grid_step) + 1 : 1;
  const long long nt =
      trading && ng == 2 ? static_cast<long long>(2.0 * trade_box / grid_step) + 1 : 1;
  long long total = np * na;
  for (int w = 0; w < (trading && ng == 2 ? nw : 0); ++w) total *= nt;
  if (total > 50'000'000)
    throw std::length_error("brute_force_oracle: grid of " + std::to_string(total) +
                            " points exceeds the 5e7 cap");

  OracleResult res;
  VectorXd p(ng);
  MatrixXd alpha(ng, 1);
  MatrixXd trades = MatrixXd::Zero(ng, trading ? nw : 0);

  std::vector<long long> tidx(static_cast<std::size_t>(nw), 0);
  for (long long ip = 0; ip < std::max(np, 1LL); ++ip) {
    p[0] = p_lo + static_cast<double>(ip) * grid_step;
    if (ng == 2) p[1] = residual_load - p[0];
    for (long long ia = 0; ia < na; ++ia) {
      alpha(0, 0) = ng == 2 ? static_cast<double>(ia) * grid_step : 1.0;
      if (ng == 2) alpha(1, 0) = 1.0 - alpha(0, 0);
      // Innermost: sweep producer 1's trade vector.
      std::fill(tidx.begin(), tidx.end(), 0);
      while (true) {
        if (trading && ng == 2)
          for (int w = 0; w < nw; ++w) {
            trades(0, w) = -trade_box + static_cast<double>(tidx[static_cast<std::size_t>(w)]) *
                                            grid_step;
            trades(1, w) = -trades(0, w);
          }
        ++res.evaluations;
        if (oracle_feasible(c, p, alpha, trades, 1e-9)) {
          res.found_feasible = true;
          res.best_objective =
              std::min(res.best_objective, oracle_objective(c, kind, p, alpha, trades));
        }
        if (!(trading && ng == 2)) break;
        int w = 0;
        for (; w < nw; ++w) {
          if (++tidx[static_cast<std::size_t>(w)] < nt) break;
          tidx[static_cast<std::size_t>(w)] = 0;
        }
        if (w == nw) break;
      }
    }
  }
  return res;
}

}  // namespace ccm
