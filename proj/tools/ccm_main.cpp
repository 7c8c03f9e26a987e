// Command-line front end: case generation, single clearing runs, the
// with/without risk-trading comparison, and the proposition verifier.
// Exit codes: 0 success, 1 validation or file error, 2 solver failure,
// 3 proposition-check failure under --strict.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "ccm/analysis.hpp"
#include "ccm/builder.hpp"
#include "ccm/case_model.hpp"
#include "ccm/report_io.hpp"

namespace fs = std::filesystem;
using namespace ccm;

namespace {

struct CommonArgs {
  std::string case_path;
  std::int64_t builtin_seed = -1;
  double eps_g = -1.0;
  double eps_f = -1.0;
  std::string out_dir;
  std::vector<std::string> formats = {"json-report", "csv-tables", "plot-data"};
  bool strict = false;
};

void add_case_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--case", args.case_path, "case file (JSON)");
  cmd->add_option("--builtin-seed", args.builtin_seed, "use the builtin study case with this seed");
  cmd->add_option("--eps-g", args.eps_g, "generation chance-constraint tolerance override");
  cmd->add_option("--eps-f", args.eps_f, "flow chance-constraint tolerance override");
}

void add_output_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--out", args.out_dir,
                  "output directory (default: $CCM_OUT_DIR or current directory)");
  cmd->add_option("--formats", args.formats,
                  "subset of json-report,csv-tables,plot-data")
      ->delimiter(',');
  cmd->add_flag("--strict", args.strict, "exit 3 when a proposition or price check fails");
}

Case resolve_case(const CommonArgs& args) {
  Case c;
  if (!args.case_path.empty() && args.builtin_seed >= 0)
    throw ValidationError("give either --case or --builtin-seed, not both");
  if (!args.case_path.empty()) {
    c = load_case(args.case_path);
  } else if (args.builtin_seed >= 0) {
    c = builtin_case_study(static_cast<std::uint64_t>(args.builtin_seed),
                           args.eps_g > 0 ? args.eps_g : 0.05,
                           args.eps_f > 0 ? args.eps_f : 0.05);
  } else {
    throw ValidationError("one of --case or --builtin-seed is required");
  }
  if (!args.case_path.empty() && (args.eps_g > 0 || args.eps_f > 0)) {
    if (args.eps_g > 0) c.eps_g = args.eps_g;
    if (args.eps_f > 0) c.eps_f = args.eps_f;
    c.validate();
  }
  return c;
}

fs::path resolve_out_dir(const CommonArgs& args) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (const char* env = std::getenv("CCM_OUT_DIR")) return env;
  return ".";
}

bool wants(const CommonArgs& args, const std::string& f) {
  return std::find(args.formats.begin(), args.formats.end(), f) != args.formats.end();
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

template <typename Fn>
void write_csv(const fs::path& p, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_file(p, ss.str());
}

FormulationKind parse_kind(const std::string& s) {
  if (s == "rn" || s == "risk_neutral") return FormulationKind::RiskNeutral;
  if (s == "ra" || s == "no-rt" || s == "risk_averse") return FormulationKind::RiskAverse;
  if (s == "rt" || s == "risk_trading") return FormulationKind::RiskTrading;
  throw ValidationError("unknown formulation kind '" + s + "' (use rn|ra|rt)");
}

void print_prices_summary(const Case& c, const Prices& p) {
  std::cout << "  lambda (energy): " << p.lambda_system << " $/MWh";
  if ((p.lambda_node.array() - p.lambda_system).abs().maxCoeff() > 1e-6)
    std::cout << " (congested; nodal spread "
              << p.lambda_node.maxCoeff() - p.lambda_node.minCoeff() << ")";
  std::cout << "\n  chi (reserve):  ";
  for (Eigen::Index u = 0; u < p.chi.size(); ++u)
    std::cout << (u ? ", " : "") << c.res_units[static_cast<std::size_t>(u)].id << "="
              << p.chi[u];
  std::cout << "\n";
  if (p.mu.size() > 0) {
    std::cout << "  mu (risk):      ";
    for (Eigen::Index w = 0; w < p.mu.size(); ++w) std::cout << (w ? ", " : "") << p.mu[w];
    std::cout << "\n";
  }
}

int cmd_casegen(const CommonArgs& args, const std::string& out_file) {
  if (args.builtin_seed < 0) throw ValidationError("casegen requires --builtin-seed");
  const Case c = builtin_case_study(static_cast<std::uint64_t>(args.builtin_seed),
                                    args.eps_g > 0 ? args.eps_g : 0.05,
                                    args.eps_f > 0 ? args.eps_f : 0.05);
  save_case(c, out_file);
  std::cout << "wrote " << out_file << " (seed " << args.builtin_seed << ", "
            << c.num_gens() << " generators, " << c.num_res() << " RES)\n";
  return 0;
}

int cmd_clear(const CommonArgs& args, const std::string& kind_str,
              const std::string& dump_path) {
  const Case c = resolve_case(args);
  const FormulationKind kind = parse_kind(kind_str);
  if (!dump_path.empty()) {
    std::ofstream out(dump_path);
    if (!out) throw std::runtime_error("cannot write " + dump_path);
    build_program(c, kind).dump(out);
  }
  const FormulationOutcome out = run_clearing(c, kind);
  std::cout << to_string(kind) << " clearing: objective " << out.objective << " $\n";
  print_prices_summary(c, out.prices);

  const fs::path dir = resolve_out_dir(args);
  fs::create_directories(dir);
  if (wants(args, "json-report"))
    write_file(dir / "report.json", clearing_report_to_json(c, out));
  if (wants(args, "csv-tables")) {
    write_csv(dir / "prices.csv", [&](std::ostream& os) { write_prices_csv(os, c, out.prices); });
    write_csv(dir / "dispatch.csv", [&](std::ostream& os) { write_dispatch_csv(os, c, out); });
  }
  if (wants(args, "plot-data") && kind == FormulationKind::RiskTrading) {
    const ConicProgram pr = build_program(c, kind);
    write_csv(dir / "event_probabilities.csv",
              [&](std::ostream& os) { write_event_probability_csv(os, c, pr, out.prices); });
    write_csv(dir / "trades.csv", [&](std::ostream& os) { write_trades_csv(os, c, out); });
  }
  if (args.strict && !out.formulas.all_pass()) {
    std::cerr << "price-formula checks failed (" << out.formulas.failures() << " items)\n";
    return 3;
  }
  return 0;
}

int cmd_compare(const CommonArgs& args) {
  const Case c = resolve_case(args);
  const ComparisonReport rep = run_comparison(c);
  std::cout << "no-rt objective " << rep.no_rt.objective << " $, rt objective "
            << rep.rt.objective << " $ (reduction " << 100.0 * rep.cost_reduction << "%)\n";
  std::cout << "rt prices:\n";
  print_prices_summary(c, rep.rt.prices);
  std::cout << "propositions: " << (rep.propositions.all_pass() ? "all pass" : "FAILURES")
            << "\n";

  const fs::path dir = resolve_out_dir(args);
  fs::create_directories(dir);
  if (wants(args, "json-report"))
    write_file(dir / "report.json", comparison_report_to_json(c, rep));
  if (wants(args, "csv-tables")) {
    write_csv(dir / "prices.csv",
              [&](std::ostream& os) { write_prices_csv(os, c, rep.rt.prices); });
    write_csv(dir / "dispatch_rt.csv",
              [&](std::ostream& os) { write_dispatch_csv(os, c, rep.rt); });
    write_csv(dir / "dispatch_no_rt.csv",
              [&](std::ostream& os) { write_dispatch_csv(os, c, rep.no_rt); });
    write_csv(dir / "participation.csv",
              [&](std::ostream& os) { write_participation_csv(os, c, rep); });
  }
  if (wants(args, "plot-data")) {
    const ConicProgram pr = build_program(c, FormulationKind::RiskTrading);
    write_csv(dir / "event_probabilities.csv", [&](std::ostream& os) {
      write_event_probability_csv(os, c, pr, rep.rt.prices);
    });
    write_csv(dir / "trades.csv",
              [&](std::ostream& os) { write_trades_csv(os, c, rep.rt); });
  }
  if (args.strict && !rep.propositions.all_pass()) {
    for (const auto& it : rep.propositions.items)
      if (!it.pass)
        std::cerr << "proposition check failed: " << it.name << " residual " << it.residual
                  << (it.note.empty() ? "" : " (" + it.note + ")") << "\n";
    return 3;
  }
  return 0;
}

int cmd_verify(const CommonArgs& args) {
  const Case c = resolve_case(args);
  const ConicProgram pr = build_program(c, FormulationKind::RiskTrading);
  const Solution sol = solve(pr);
  if (sol.status != SolveStatus::Optimal) {
    std::string msg = sol.message;
    if (auto diag = diagnose_belief_disjointness(c)) msg += "; " + *diag;
    throw SolveFailure(FormulationKind::RiskTrading, msg);
  }
  const Prices prices = extract_prices(pr, sol);
  const PropositionReport rep = verify_propositions(c, pr, sol, prices);
  const KktReport kkt = kkt_residuals(pr, sol);
  int failures = 0;
  for (const auto& it : rep.items) {
    std::cout << (it.pass ? "pass " : "FAIL ") << it.name << "  residual " << it.residual
              << " (threshold " << it.threshold << ")\n";
    if (!it.pass) {
      ++failures;
      if (!it.note.empty()) std::cout << "     note: " << it.note << "\n";
    }
  }
  std::cout << (kkt.pass ? "pass " : "FAIL ") << "kkt_certificate  stationarity "
            << kkt.stationarity << " complementarity " << kkt.complementarity << "\n";
  std::cout << failures << " failing checks\n";
  if (args.strict && (failures > 0 || !kkt.pass)) return 3;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chance-constrained electricity market clearing with risk trading"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string kind_str = "rt";
  std::string out_file;
  std::string dump_path;

  auto* casegen = app.add_subcommand("casegen", "write a builtin study case to a file");
  casegen->add_option("--seed", args.builtin_seed, "RNG seed")->required();
  casegen->add_option("--eps-g", args.eps_g, "generation chance-constraint tolerance");
  casegen->add_option("--eps-f", args.eps_f, "flow chance-constraint tolerance");
  casegen->add_option("--out", out_file, "output case file")->required();

  auto* clear = app.add_subcommand("clear", "solve one market-clearing formulation");
  add_case_options(clear, args);
  clear->add_option("--kind", kind_str, "formulation: rn, ra or rt (default rt)");
  clear->add_option("--dump-program", dump_path, "write the assembled conic program");
  add_output_options(clear, args);

  auto* compare = app.add_subcommand("compare", "clear with and without risk trading");
  add_case_options(compare, args);
  add_output_options(compare, args);

  auto* verify = app.add_subcommand("verify", "run the proposition suite on a trading solve");
  add_case_options(verify, args);
  verify->add_flag("--strict", args.strict, "exit 3 when a check fails");

  CLI11_PARSE(app, argc, argv);

  try {
    if (casegen->parsed()) return cmd_casegen(args, out_file);
    if (clear->parsed()) return cmd_clear(args, kind_str, dump_path);
    if (compare->parsed()) return cmd_compare(args);
    if (verify->parsed()) return cmd_verify(args);
  } catch (const SolveFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
