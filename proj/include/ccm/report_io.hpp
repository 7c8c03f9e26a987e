#pragma once

#include <ostream>
#include <string>

#include "ccm/analysis.hpp"

// Serialization of clearing results: a JSON report plus plain-CSV tables
// and plot-data matrices (column contracts in docs/file_formats.md).
// Output is byte-deterministic for identical inputs.

namespace ccm {

std::string comparison_report_to_json(const Case& c, const ComparisonReport& rep);
std::string clearing_report_to_json(const Case& c, const FormulationOutcome& out);

/// kind,index,id,value rows for lambda (per node), chi (per RES unit),
/// mu (per event, when present).
void write_prices_csv(std::ostream& os, const Case& c, const Prices& prices);

/// generator,p_mw,reserve_mw,t,premium,alpha[u...] rows.
void write_dispatch_csv(std::ostream& os, const Case& c, const FormulationOutcome& out);

/// Power outputs and balancing participation factors of both cases side by
/// side, one generator per row, reserve prices in the footer rows.
void write_participation_csv(std::ostream& os, const Case& c, const ComparisonReport& rep);

/// Event-indexed plot matrix (one numeric column per event, breakpoints in
/// the header): per-belief event probabilities for every producer and
/// belief, the common-belief probabilities, and the risk prices mu.
void write_event_probability_csv(std::ostream& os, const Case& c,
                                 const ConicProgram& rt_program, const Prices& prices);

/// Event-indexed plot matrix of minimum-norm ADS trades, one producer per row.
void write_trades_csv(std::ostream& os, const Case& c, const FormulationOutcome& rt);

}  // namespace ccm
