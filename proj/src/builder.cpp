#include "ccm/builder.hpp"

#include <cmath>
#include <stdexcept>

namespace ccm {

std::string to_string(FormulationKind k) {
  switch (k) {
    case FormulationKind::RiskNeutral: return "risk_neutral";
    case FormulationKind::RiskAverse: return "risk_averse";
    case FormulationKind::RiskTrading: return "risk_trading";
  }
  return "?";
}

const LabelRef& ConicProgram::label(const std::string& name) const {
  const auto it = labels.find(name);
  if (it == labels.end())
    throw std::logic_error("program label '" + name + "' is missing");
  return it->second;
}

double ConicProgram::objective_at(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(Q * x) + c.dot(x) + c0;
}

void ConicProgram::validate() const {
  const int n = num_vars;
  if (Q.rows() != n || Q.cols() != n || c.size() != n)
    throw std::logic_error("program: objective dimensions disagree");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
    throw std::logic_error("program: equality dimensions disagree");
  if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n))
    throw std::logic_error("program: inequality dimensions disagree");
  for (const auto& blk : soc)
    if (blk.E.cols() != n || blk.E.rows() != blk.g.size() || blk.E.rows() < 1)
      throw std::logic_error("program: cone block dimensions disagree");

  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::logic_error("program: Q must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
    throw std::logic_error("program: Q is not PSD");

  std::map<std::pair<int, int>, std::string> seen;
  for (const auto& [name, ref] : labels) {
    int limit = 0;
    switch (ref.kind) {
      case LabelKind::Variable: limit = n; break;
      case LabelKind::EqRow: limit = num_eq(); break;
      case LabelKind::IneqRow: limit = num_ineq(); break;
      case LabelKind::SocBlock: limit = static_cast<int>(soc.size()); break;
    }
    if (ref.index < 0 || ref.index >= limit)
      throw std::logic_error("program: label '" + name + "' does not resolve");
    const auto key = std::make_pair(static_cast<int>(ref.kind), ref.index);
    const auto [it, inserted] = seen.emplace(key, name);
    if (!inserted)
      throw std::logic_error("program: labels '" + it->second + "' and '" + name +
                             "' collide");
  }
}

void ConicProgram::dump(std::ostream& os) const {
  auto triplets = [&os](const char* tag, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) os << tag << " " << i << " " << j << " " << m(i, j) << "\n";
  };
  os << "ccm-conic-program 1\n";
  os << "vars " << num_vars << " eq " << num_eq() << " ineq " << num_ineq() << " soc "
     << soc.size() << "\n";
  os << "c0 " << c0 << "\n";
  triplets("Q", Q);
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (c[i] != 0.0) os << "c " << i << " " << c[i] << "\n";
  triplets("A", A);
  for (Eigen::Index i = 0; i < b.size(); ++i)
    if (b[i] != 0.0) os << "b " << i << " " << b[i] << "\n";
  triplets("G", G);
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (h[i] != 0.0) os << "h " << i << " " << h[i] << "\n";
  for (std::size_t j = 0; j < soc.size(); ++j) {
    os << "cone " << j << " dim " << soc[j].E.rows() << "\n";
    for (Eigen::Index r = 0; r < soc[j].E.rows(); ++r) {
      for (Eigen::Index v = 0; v < soc[j].E.cols(); ++v)
        if (soc[j].E(r, v) != 0.0)
          os << "E " << j << " " << r << " " << v << " " << soc[j].E(r, v) << "\n";
      if (soc[j].g[r] != 0.0) os << "g " << j << " " << r << " " << soc[j].g[r] << "\n";
    }
  }
  const char* kind_name[] = {"var", "eq", "ineq", "soc"};
  for (const auto& [name, ref] : labels)
    os << "label " << name << " " << kind_name[static_cast<int>(ref.kind)] << " "
       << ref.index << "\n";
}

Eigen::MatrixXd compute_ptdf(const Network& net) {
  const int nn = static_cast<int>(net.nodes.size());
  const int nl = static_cast<int>(net.lines.size());
  if (nl == 0) return Eigen::MatrixXd::Zero(0, nn);

  Eigen::MatrixXd bbus = Eigen::MatrixXd::Zero(nn, nn);
  for (const auto& l : net.lines) {
    const int i = net.node_index(l.from);
    const int j = net.node_index(l.to);
    const double y = 1.0 / l.reactance;
    bbus(i, i) += y;
    bbus(j, j) += y;
    bbus(i, j) -= y;
    bbus(j, i) -= y;
  }
  const int slack = net.node_index(net.slack_node);

  // Invert the reduced susceptance matrix, then pad the slack column back.
  Eigen::MatrixXd reduced(nn - 1, nn - 1);
  std::vector<int> keep;
  for (int i = 0; i < nn; ++i)
    if (i != slack) keep.push_back(i);
  for (int r = 0; r < nn - 1; ++r)
    for (int cidx = 0; cidx < nn - 1; ++cidx)
      reduced(r, cidx) = bbus(keep[static_cast<std::size_t>(r)],
                              keep[static_cast<std::size_t>(cidx)]);
  const Eigen::MatrixXd xred = reduced.fullPivLu().inverse();
  Eigen::MatrixXd xfull = Eigen::MatrixXd::Zero(nn, nn);
  for (int r = 0; r < nn - 1; ++r)
    for (int cidx = 0; cidx < nn - 1; ++cidx)
      xfull(keep[static_cast<std::size_t>(r)], keep[static_cast<std::size_t>(cidx)]) =
          xred(r, cidx);

  Eigen::MatrixXd ptdf(nl, nn);
  for (int l = 0; l < nl; ++l) {
    const auto& ln = net.lines[static_cast<std::size_t>(l)];
    const int i = net.node_index(ln.from);
    const int j = net.node_index(ln.to);
    const double y = 1.0 / ln.reactance;
    ptdf.row(l) = y * (xfull.row(i) - xfull.row(j));
  }
  return ptdf;
}

ConicProgram build_program(const Case& c, FormulationKind kind) {
  const int ng = c.num_gens();
  const int nu = c.num_res();
  const int nn = static_cast<int>(c.network.nodes.size());
  const int nl = static_cast<int>(c.network.lines.size());
  const int nk = c.num_beliefs();
  const int nw = (kind == FormulationKind::RiskTrading) ? c.partition.num_events() : 0;
  const bool has_t = kind != FormulationKind::RiskNeutral;
  const bool has_a = kind == FormulationKind::RiskTrading;

  // Variable offsets.
  const int off_p = 0;
  const int off_alpha = off_p + ng;
  const int off_s = off_alpha + ng * nu;
  const int off_t = off_s + ng;
  const int off_a = off_t + (has_t ? ng : 0);
  const int off_sf = off_a + (has_a ? ng * nw : 0);
  const int n = off_sf + nl;
  auto pvar = [&](int i) { return off_p + i; };
  auto avar = [&](int i, int u) { return off_alpha + i * nu + u; };
  auto svar = [&](int i) { return off_s + i; };
  auto tvar = [&](int i) { return off_t + i; };
  auto dvar = [&](int i, int w) { return off_a + i * nw + w; };
  auto fvar = [&](int l) { return off_sf + l; };

  ConicProgram pr;
  pr.num_vars = n;
  pr.meta.kind = kind;
  pr.meta.num_gens = ng;
  pr.meta.num_res = nu;
  pr.meta.num_nodes = nn;
  pr.meta.num_events = nw;
  pr.meta.num_beliefs = has_t ? nk : 0;
  pr.meta.num_lines = nl;
  pr.meta.z_g = std_normal_quantile(1.0 - c.eps_g);
  pr.meta.z_f = std_normal_quantile(1.0 - c.eps_f);
  pr.meta.total_forecast = c.total_forecast();
  for (const auto& g : c.generators) pr.meta.gen_node.push_back(c.network.node_index(g.node));
  for (const auto& u : c.res_units) pr.meta.res_node.push_back(c.network.node_index(u.node));

  const Eigen::MatrixXd m_common = matrix_sqrt(c.sigma_common);

  // Aggregate sigmas and discrete event probabilities per producer/belief.
  if (has_t) {
    pr.meta.sigma_agg.resize(ng, nk);
    for (int i = 0; i < ng; ++i)
      for (int k = 0; k < nk; ++k)
        pr.meta.sigma_agg(i, k) =
            aggregate_sigma(c.risk_sets[static_cast<std::size_t>(i)]
                                .covariances[static_cast<std::size_t>(k)])
                .value;
  }
  if (has_a) {
    pr.meta.breakpoints_mw = c.partition.breakpoints_mw(pr.meta.total_forecast, 0.0);
    pr.meta.event_probs.resize(ng * nk, nw);
    for (int i = 0; i < ng; ++i)
      for (int k = 0; k < nk; ++k) {
        const auto probs = event_probabilities(
            c.partition, AggregateSigma{pr.meta.sigma_agg(i, k)}, pr.meta.total_forecast);
        for (int w = 0; w < nw; ++w)
          pr.meta.event_probs(i * nk + k, w) = probs[static_cast<std::size_t>(w)];
      }
  }

  // Objective.
  pr.Q = Eigen::MatrixXd::Zero(n, n);
  pr.c = Eigen::VectorXd::Zero(n);
  pr.c0 = 0.0;
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    pr.Q(pvar(i), pvar(i)) = 2.0 * g.c2;
    pr.c[pvar(i)] = g.c1;
    pr.c0 += g.c0;
    if (has_t) {
      pr.c[tvar(i)] = 1.0;
    } else {
      // Exact expected balancing cost: c2 * alpha_i' Sigma alpha_i.
      for (int u = 0; u < nu; ++u)
        for (int v = 0; v < nu; ++v)
          pr.Q(avar(i, u), avar(i, v)) = 2.0 * g.c2 * c.sigma_common(u, v);
    }
  }

  // Equalities: system balance, reserve sufficiency, ADS clearing.
  const int eq_balance = 0;
  const int eq_reserve = 1;
  const int eq_ads = eq_reserve + nu;
  const int num_eq = eq_ads + (has_a ? nw : 0);
  pr.A = Eigen::MatrixXd::Zero(num_eq, n);
  pr.b = Eigen::VectorXd::Zero(num_eq);
  for (int i = 0; i < ng; ++i) pr.A(eq_balance, pvar(i)) = 1.0;
  pr.b[eq_balance] = c.total_demand() - c.total_forecast();
  pr.labels["balance"] = {LabelKind::EqRow, eq_balance};
  for (int u = 0; u < nu; ++u) {
    for (int i = 0; i < ng; ++i) pr.A(eq_reserve + u, avar(i, u)) = 1.0;
    pr.b[eq_reserve + u] = 1.0;
    pr.labels["reserve_suff[" + std::to_string(u) + "]"] = {LabelKind::EqRow,
                                                            eq_reserve + u};
  }
  if (has_a)
    for (int w = 0; w < nw; ++w) {
      for (int i = 0; i < ng; ++i) pr.A(eq_ads + w, dvar(i, w)) = 1.0;
      pr.labels["ads_clear[" + std::to_string(w) + "]"] = {LabelKind::EqRow, eq_ads + w};
    }

  // Linear inequalities: capacity chance constraints, alpha box, flows.
  const int row_cap = 0;
  const int row_alpha = row_cap + 2 * ng;
  const int row_flow = row_alpha + 2 * ng * nu;
  const int num_ineq = row_flow + 2 * nl;
  pr.G = Eigen::MatrixXd::Zero(num_ineq, n);
  pr.h = Eigen::VectorXd::Zero(num_ineq);
  for (int i = 0; i < ng; ++i) {
    const auto& g = c.generators[static_cast<std::size_t>(i)];
    const int hi = row_cap + 2 * i;
    const int lo = hi + 1;
    pr.G(hi, pvar(i)) = 1.0;
    pr.G(hi, svar(i)) = pr.meta.z_g;
    pr.h[hi] = g.p_max;
    pr.G(lo, pvar(i)) = -1.0;
    pr.G(lo, svar(i)) = pr.meta.z_g;
    pr.h[lo] = -g.p_min;
    pr.labels["cap_hi[" + std::to_string(i) + "]"] = {LabelKind::IneqRow, hi};
    pr.labels["cap_lo[" + std::to_string(i) + "]"] = {LabelKind::IneqRow, lo};
  }
  for (int i = 0; i < ng; ++i)
    for (int u = 0; u < nu; ++u) {
      const int lo = row_alpha + 2 * (i * nu + u);
      const int hi = lo + 1;
      pr.G(lo, avar(i, u)) = -1.0;
      pr.h[lo] = 0.0;
      pr.G(hi, avar(i, u)) = 1.0;
      pr.h[hi] = 1.0;
      pr.labels["alpha_lo[" + std::to_string(i) + "][" + std::to_string(u) + "]"] =
          {LabelKind::IneqRow, lo};
      pr.labels["alpha_hi[" + std::to_string(i) + "][" + std::to_string(u) + "]"] =
          {LabelKind::IneqRow, hi};
    }

  if (nl > 0) {
    pr.meta.ptdf = compute_ptdf(c.network);
    for (int l = 0; l < nl; ++l) {
      const auto& ln = c.network.lines[static_cast<std::size_t>(l)];
      // Deterministic flow from scheduled injections.
      double base = 0.0;
      for (int node = 0; node < nn; ++node)
        base -= pr.meta.ptdf(l, node) *
                c.network.nodes[static_cast<std::size_t>(node)].demand_mw;
      for (int u = 0; u < nu; ++u)
        base += pr.meta.ptdf(l, pr.meta.res_node[static_cast<std::size_t>(u)]) *
                c.res_units[static_cast<std::size_t>(u)].forecast_mw;
      const int hi = row_flow + 2 * l;
      const int lo = hi + 1;
      for (int i = 0; i < ng; ++i) {
        const double coef = pr.meta.ptdf(l, pr.meta.gen_node[static_cast<std::size_t>(i)]);
        pr.G(hi, pvar(i)) = coef;
        pr.G(lo, pvar(i)) = -coef;
      }
      pr.G(hi, fvar(l)) = pr.meta.z_f;
      pr.G(lo, fvar(l)) = pr.meta.z_f;
      pr.h[hi] = ln.flow_limit_mw - base;
      pr.h[lo] = ln.flow_limit_mw + base;
      pr.labels["flow_hi[" + std::to_string(l) + "]"] = {LabelKind::IneqRow, hi};
      pr.labels["flow_lo[" + std::to_string(l) + "]"] = {LabelKind::IneqRow, lo};
      pr.labels["sf[" + std::to_string(l) + "]"] = {LabelKind::Variable, fvar(l)};
    }
  } else {
    pr.meta.ptdf = Eigen::MatrixXd::Zero(0, nn);
  }

  // Cone blocks.
  // s_i >= || m_common' alpha_i ||.
  for (int i = 0; i < ng; ++i) {
    ConicProgram::SocBlock blk;
    blk.E = Eigen::MatrixXd::Zero(1 + nu, n);
    blk.g = Eigen::VectorXd::Zero(1 + nu);
    blk.E(0, svar(i)) = 1.0;
    for (int r = 0; r < nu; ++r)
      for (int u = 0; u < nu; ++u) blk.E(1 + r, avar(i, u)) = m_common(r, u);
    pr.labels["soc_s[" + std::to_string(i) + "]"] = {LabelKind::SocBlock,
                                                     static_cast<int>(pr.soc.size())};
    pr.soc.push_back(std::move(blk));
  }
  // sf_l >= || m_common' rho_l(alpha) || with rho_l the line's exposure to
  // each RES error under the affine recourse.
  for (int l = 0; l < nl; ++l) {
    ConicProgram::SocBlock blk;
    blk.E = Eigen::MatrixXd::Zero(1 + nu, n);
    blk.g = Eigen::VectorXd::Zero(1 + nu);
    blk.E(0, fvar(l)) = 1.0;
    for (int r = 0; r < nu; ++r) {
      for (int u = 0; u < nu; ++u) {
        const double rho_const =
            pr.meta.ptdf(l, pr.meta.res_node[static_cast<std::size_t>(u)]);
        blk.g[1 + r] += m_common(r, u) * rho_const;
        for (int i = 0; i < ng; ++i)
          blk.E(1 + r, avar(i, u)) -=
              m_common(r, u) * pr.meta.ptdf(l, pr.meta.gen_node[static_cast<std::size_t>(i)]);
      }
    }
    pr.labels["soc_flow[" + std::to_string(l) + "]"] = {LabelKind::SocBlock,
                                                        static_cast<int>(pr.soc.size())};
    pr.soc.push_back(std::move(blk));
  }
  // Worst-case cost epigraphs: t_i - sum_w P_w(sigma_ik) a_{i,w} >=
  // c2_i ||M_k' alpha_i||^2, written as the standard cone lift
  // (xi + 1, 2 sqrt(c2) M_k' alpha, xi - 1) in SOC.
  if (has_t) {
    for (int i = 0; i < ng; ++i) {
      const auto& g = c.generators[static_cast<std::size_t>(i)];
      const double root = std::sqrt(g.c2);
      for (int k = 0; k < nk; ++k) {
        const Eigen::MatrixXd mk = matrix_sqrt(
            c.risk_sets[static_cast<std::size_t>(i)].covariances[static_cast<std::size_t>(k)]);
        ConicProgram::SocBlock blk;
        blk.E = Eigen::MatrixXd::Zero(nu + 2, n);
        blk.g = Eigen::VectorXd::Zero(nu + 2);
        blk.E(0, tvar(i)) = 1.0;
        blk.g[0] = 1.0;
        blk.E(nu + 1, tvar(i)) = 1.0;
        blk.g[nu + 1] = -1.0;
        if (has_a)
          for (int w = 0; w < nw; ++w) {
            blk.E(0, dvar(i, w)) = -pr.meta.event_probs(i * nk + k, w);
            blk.E(nu + 1, dvar(i, w)) = -pr.meta.event_probs(i * nk + k, w);
          }
        for (int r = 0; r < nu; ++r)
          for (int u = 0; u < nu; ++u)
            blk.E(1 + r, avar(i, u)) = 2.0 * root * mk(r, u);
        pr.labels["epigraph[" + std::to_string(i) + "][" + std::to_string(k) + "]"] =
            {LabelKind::SocBlock, static_cast<int>(pr.soc.size())};
        pr.soc.push_back(std::move(blk));
      }
    }
  }

  // Variable labels.
  for (int i = 0; i < ng; ++i) {
    pr.labels["p_G[" + std::to_string(i) + "]"] = {LabelKind::Variable, pvar(i)};
    pr.labels["s[" + std::to_string(i) + "]"] = {LabelKind::Variable, svar(i)};
    if (has_t) pr.labels["t[" + std::to_string(i) + "]"] = {LabelKind::Variable, tvar(i)};
    for (int u = 0; u < nu; ++u)
      pr.labels["alpha[" + std::to_string(i) + "][" + std::to_string(u) + "]"] =
          {LabelKind::Variable, avar(i, u)};
    if (has_a)
      for (int w = 0; w < nw; ++w)
        pr.labels["a[" + std::to_string(i) + "][" + std::to_string(w) + "]"] =
            {LabelKind::Variable, dvar(i, w)};
  }

  pr.validate();
  return pr;
}

}  // namespace ccm
