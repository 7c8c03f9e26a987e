#pragma once

#include "ccm/case_model.hpp"
#include "ccm/program.hpp"

// Assembles the three market-clearing formulations as conic programs:
//
//   RiskNeutral: expected-cost objective with the variance term kept as an
//       exact quadratic in the participation factors.
//   RiskAverse:  per-producer epigraph variables t_i bounding the
//       worst-case expected balancing cost over the producer's covariance
//       set (one cone block per producer and belief).
//   RiskTrading: RiskAverse plus ADS positions a_{i,w}; each epigraph gains
//       the expected security payout under belief k and the positions clear
//       per event.
//
// Variable layout: p_G (|G|), alpha (|G| x |U|, row-major), s (|G|),
// then t (|G|) for RiskAverse/RiskTrading, then a (|G| x W) for
// RiskTrading, then sf (one flow-std auxiliary per line when the network
// has lines).
//
// Label scheme (0-based indices): p_G[i], alpha[i][u], s[i], t[i], a[i][w],
// sf[l]; balance, reserve_suff[u], ads_clear[w]; cap_hi[i], cap_lo[i],
// alpha_lo[i][u], alpha_hi[i][u], flow_hi[l], flow_lo[l]; soc_s[i],
// soc_flow[l], epigraph[i][k].
//
// Networks with lines use a DC PTDF model computed from line reactances
// and the declared slack node: one system-wide balance row plus two
// chance-constrained flow rows per line whose uncertainty margin is
// z_{1-eps_f} times the flow standard deviation under the affine recourse.
// An empty lines list is the copper plate: single balance row, no flow rows.

namespace ccm {

ConicProgram build_program(const Case& c, FormulationKind kind);

/// PTDF matrix (lines x nodes) for the case's network; zero columns at the
/// slack node. Exposed for tests and pricing.
Eigen::MatrixXd compute_ptdf(const Network& net);

}  // namespace ccm
