#include "ccm/pricing.hpp"

#include <cmath>

namespace ccm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

bool FormulaReport::all_pass() const {
  for (const auto& it : items)
    if (!it.skipped && !it.pass) return false;
  return true;
}

int FormulaReport::failures() const {
  int n = 0;
  for (const auto& it : items)
    if (!it.skipped && !it.pass) ++n;
  return n;
}

Prices extract_prices(const ConicProgram& program, const Solution& solution) {
  if (solution.status != SolveStatus::Optimal)
    throw std::invalid_argument("extract_prices: solution is not OPTIMAL");
  const auto& meta = program.meta;
  Prices p;
  p.lambda_system = -solution.eq_duals[program.label("balance").index];

  p.chi.resize(meta.num_res);
  for (int u = 0; u < meta.num_res; ++u)
    p.chi[u] = -solution.eq_duals[program.label("reserve_suff[" + std::to_string(u) + "]").index];

  if (meta.num_events > 0) {
    p.mu.resize(meta.num_events);
    for (int w = 0; w < meta.num_events; ++w)
      p.mu[w] = -solution.eq_duals[program.label("ads_clear[" + std::to_string(w) + "]").index];
  }

  p.delta_hi.resize(meta.num_gens);
  p.delta_lo.resize(meta.num_gens);
  p.zeta.resize(meta.num_gens);
  for (int i = 0; i < meta.num_gens; ++i) {
    p.delta_hi[i] = solution.ineq_duals[program.label("cap_hi[" + std::to_string(i) + "]").index];
    p.delta_lo[i] = solution.ineq_duals[program.label("cap_lo[" + std::to_string(i) + "]").index];
    p.zeta[i] = solution.soc_duals[static_cast<std::size_t>(
        program.label("soc_s[" + std::to_string(i) + "]").index)][0];
  }

  if (meta.num_beliefs > 0) {
    p.eta.resize(meta.num_gens, meta.num_beliefs);
    for (int i = 0; i < meta.num_gens; ++i)
      for (int k = 0; k < meta.num_beliefs; ++k) {
        const auto& lam = solution.soc_duals[static_cast<std::size_t>(
            program.label("epigraph[" + std::to_string(i) + "][" + std::to_string(k) + "]")
                .index)];
        p.eta(i, k) = lam[0] + lam[lam.size() - 1];
      }
  }

  p.theta_hi.resize(meta.num_lines);
  p.theta_lo.resize(meta.num_lines);
  for (int l = 0; l < meta.num_lines; ++l) {
    p.theta_hi[l] = solution.ineq_duals[program.label("flow_hi[" + std::to_string(l) + "]").index];
    p.theta_lo[l] = solution.ineq_duals[program.label("flow_lo[" + std::to_string(l) + "]").index];
  }

  // Nodal prices: uniform component adjusted by the flow duals through the
  // line sensitivities.
  p.lambda_node = VectorXd::Constant(meta.num_nodes, p.lambda_system);
  for (int l = 0; l < meta.num_lines; ++l)
    for (int node = 0; node < meta.num_nodes; ++node)
      p.lambda_node[node] -= (p.theta_hi[l] - p.theta_lo[l]) * meta.ptdf(l, node);
  return p;
}

namespace {

/// rho_l(alpha): exposure of line l to each RES forecast error under the
/// affine recourse.
VectorXd line_exposure(const ProgramMeta& meta, const MatrixXd& alpha, int l) {
  VectorXd rho(meta.num_res);
  for (int u = 0; u < meta.num_res; ++u) {
    rho[u] = meta.ptdf(l, meta.res_node[static_cast<std::size_t>(u)]);
    for (int i = 0; i < meta.num_gens; ++i)
      rho[u] -= meta.ptdf(l, meta.gen_node[static_cast<std::size_t>(i)]) * alpha(i, u);
  }
  return rho;
}

}  // namespace

FormulaReport check_price_formulas(const Case& c, const ConicProgram& program,
                                   const Solution& solution, const Prices& prices,
                                   double tol) {
  if (solution.status != SolveStatus::Optimal)
    throw std::invalid_argument("check_price_formulas: solution is not OPTIMAL");
  const auto& meta = program.meta;
  const int ng = meta.num_gens;
  const int nu = meta.num_res;
  const int nk = meta.num_beliefs;
  const int nw = meta.num_events;
  FormulaReport rep;

  auto add = [&rep](const std::string& name, double residual, double scale,
                    double tolv, bool skipped = false, const std::string& note = "") {
    FormulaCheckItem it;
    it.name = name;
    it.residual = residual;
    it.scale = scale;
    it.threshold = tolv * (1.0 + scale);
    it.pass = !skipped && std::abs(residual) <= it.threshold;
    it.skipped = skipped;
    it.note = note;
    rep.items.push_back(it);
  };

  MatrixXd alpha(ng, nu);
  VectorXd pg(ng);
  for (int i = 0; i < ng; ++i) {
    pg[i] = solution.primal[program.label("p_G[" + std::to_string(i) + "]").index];
    for (int u = 0; u < nu; ++u)
      alpha(i, u) = solution.primal[program.label("alpha[" + std::to_string(i) + "][" +
                                                  std::to_string(u) + "]")
                                        .index];
  }

  // (a) Energy price identity, one residual per generator.
  rep.lambda_terms.resize(ng, 3);
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    const double marginal = 2.0 * g.c2 * pg[i] + g.c1;
    const double delta_term = prices.delta_hi[i] - prices.delta_lo[i];
    double flow_term = 0.0;
    for (int l = 0; l < meta.num_lines; ++l)
      flow_term += (prices.theta_hi[l] - prices.theta_lo[l]) *
                   meta.ptdf(l, meta.gen_node[static_cast<std::size_t>(i)]);
    rep.lambda_terms(i, 0) = marginal;
    rep.lambda_terms(i, 1) = delta_term;
    rep.lambda_terms(i, 2) = flow_term;
    const double rhs = marginal + delta_term + flow_term;
    add("energy_price[" + std::to_string(i) + "]", prices.lambda_system - rhs,
        std::max(std::abs(prices.lambda_system), std::abs(rhs)), tol);
  }

  // Worst-case covariance mixtures Sigma_bar_i = sum_k eta_ik Sigma_k
  // (the common covariance itself in the risk-neutral formulation).
  std::vector<MatrixXd> sigma_bar(static_cast<std::size_t>(ng));
  for (int i = 0; i < ng; ++i) {
    if (nk == 0) {
      sigma_bar[static_cast<std::size_t>(i)] = c.sigma_common;
    } else {
      MatrixXd sb = MatrixXd::Zero(nu, nu);
      for (int k = 0; k < nk; ++k)
        sb += prices.eta(i, k) *
              c.risk_sets[static_cast<std::size_t>(i)].covariances[static_cast<std::size_t>(k)];
      sigma_bar[static_cast<std::size_t>(i)] = sb;
    }
  }

  // Standard deviation of each generator's output under the common belief,
  // and the flow-margin gradients when the network is modeled.
  VectorXd s_g(ng);
  for (int i = 0; i < ng; ++i)
    s_g[i] = std::sqrt(std::max(alpha.row(i) * c.sigma_common * alpha.row(i).transpose(), 0.0));
  const double z_g = meta.z_g;
  MatrixXd y_alpha = MatrixXd::Zero(ng, nu);
  for (int l = 0; l < meta.num_lines; ++l) {
    const VectorXd rho = line_exposure(meta, alpha, l);
    const VectorXd sig_rho = c.sigma_common * rho;
    const double sf = std::sqrt(std::max(rho.dot(sig_rho), 0.0));
    if (sf <= 1e-8) continue;
    const double weight = (prices.theta_hi[l] + prices.theta_lo[l]) * meta.z_f / sf;
    for (int i = 0; i < ng; ++i)
      for (int u = 0; u < nu; ++u)
        y_alpha(i, u) -= weight * meta.ptdf(l, meta.gen_node[static_cast<std::size_t>(i)]) *
                         sig_rho[u];
  }

  // (b) Reserve price: printed producer-average form with
  // zeta_i = z_{1-eps_g} (delta+ + delta-), plus the per-producer
  // stationarity residuals and the zeta substitution itself.
  const bool s_ok = s_g.minCoeff() > 1e-8;
  for (int u = 0; u < nu; ++u) {
    double avg = 0.0;
    for (int i = 0; i < ng; ++i) {
      const auto& g = c.generators[static_cast<std::size_t>(i)];
      const double cov_term =
          2.0 * g.c2 * alpha.row(i).dot(sigma_bar[static_cast<std::size_t>(i)].col(u));
      const double reserve_term =
          s_ok ? z_g * (prices.delta_hi[i] + prices.delta_lo[i]) *
                     alpha.row(i).dot(c.sigma_common.col(u)) / s_g[i]
               : 0.0;
      avg += cov_term + reserve_term + y_alpha(i, u);
    }
    avg /= static_cast<double>(ng);
    add("reserve_price[" + std::to_string(u) + "]", prices.chi[u] - avg,
        std::max(std::abs(prices.chi[u]), std::abs(avg)), tol, !s_ok,
        s_ok ? "" : "skipped: some s_G <= 1e-8");
  }
  for (int i = 0; i < ng; ++i) {
    if (s_g[i] <= 1e-8) {
      add("reserve_stationarity[" + std::to_string(i) + "]", 0.0, 0.0, tol, true,
          "skipped: s_G <= 1e-8");
      continue;
    }
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    double worst = 0.0, scale = 1.0;
    for (int u = 0; u < nu; ++u) {
      const double rhs =
          2.0 * g.c2 * alpha.row(i).dot(sigma_bar[static_cast<std::size_t>(i)].col(u)) +
          prices.zeta[i] * alpha.row(i).dot(c.sigma_common.col(u)) / s_g[i] + y_alpha(i, u);
      // Stationarity holds where the box bounds on alpha are slack; fold
      // their multipliers in so the residual is exact everywhere.
      const double lo = solution.ineq_duals[program.label(
          "alpha_lo[" + std::to_string(i) + "][" + std::to_string(u) + "]").index];
      const double hi = solution.ineq_duals[program.label(
          "alpha_hi[" + std::to_string(i) + "][" + std::to_string(u) + "]").index];
      worst = std::max(worst, std::abs(prices.chi[u] - (rhs - lo + hi)));
      scale = std::max({scale, std::abs(prices.chi[u]), std::abs(rhs)});
    }
    add("reserve_stationarity[" + std::to_string(i) + "]", worst, scale, tol);
  }
  for (int i = 0; i < ng; ++i) {
    const double sub = z_g * (prices.delta_hi[i] + prices.delta_lo[i]);
    add("zeta_substitution[" + std::to_string(i) + "]", prices.zeta[i] - sub,
        std::max(std::abs(prices.zeta[i]), std::abs(sub)), tol);
  }

  // (c) Risk price identity per producer.
  if (nw > 0) {
    for (int i = 0; i < ng; ++i) {
      double worst = 0.0, scale = 0.0;
      for (int w = 0; w < nw; ++w) {
        double mix = 0.0;
        for (int k = 0; k < nk; ++k)
          mix += prices.eta(i, k) * meta.event_probs(i * nk + k, w);
        worst = std::max(worst, std::abs(prices.mu[w] - mix));
        scale = std::max({scale, std::abs(prices.mu[w]), std::abs(mix)});
      }
      add("risk_price[" + std::to_string(i) + "]", worst, scale, tol, false,
          "mu_w vs sum_k eta_ik P_w(sigma_ik); non-disjoint risk sets are the usual "
          "suspect when this fails");
    }
  }

  // (d) Epigraph multipliers resolve to a probability-style weight.
  for (int i = 0; i < ng && nk > 0; ++i)
    add("eta_sum[" + std::to_string(i) + "]", prices.eta.row(i).sum() - 1.0, 1.0, tol);

  return rep;
}

}  // namespace ccm
