// mqam: experiment front end for the adaptive m-QAM scheduling MDP.
//
//   mqam solve   --spec fig3.json --out out/fig3
//   mqam compare --spec compare.json --states 2:10
//   mqam dspsa   --spec fig9.json --seed 7
//   mqam check   --spec fig4.json
//
// Exit status: 0 success, 1 spec error, 2 property failure, 3 solver
// non-convergence.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mqam/mqam.hpp"

namespace {

namespace fs = std::filesystem;
using mqam::io::Json;

enum Exit : int { kOk = 0, kSpecError = 1, kPropertyFailure = 2, kNonConvergence = 3 };

struct Common {
  std::string spec_path;
  std::string out_dir = "mqam-out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string format = "csv";
};

struct Loaded {
  mqam::ExperimentSpec spec;
  Json resolved;
};

Loaded load(const Common& common) {
  std::ifstream in(common.spec_path, std::ios::binary);
  if (!in) throw mqam::SpecError(common.spec_path + ": cannot open spec file");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Loaded out{mqam::parse_spec(text, common.spec_path), {}};
  if (common.seed_given) out.spec.dspsa.config.seed = common.seed;
  out.resolved = mqam::resolved_json(out.spec);
  return out;
}

bool use_csv(const Common& c) { return c.format == "csv"; }

/// Builds a model, translating configuration failures into spec errors.
mqam::SystemModel make_model(const mqam::SystemSpec& sys, mqam::FsmcChannel channel) {
  try {
    return mqam::SystemModel(mqam::build_config(sys, std::move(channel)));
  } catch (const std::invalid_argument& e) {
    throw mqam::SpecError(std::string("invalid system: ") + e.what());
  } catch (const std::domain_error& e) {
    throw mqam::SpecError(std::string("invalid system: ") + e.what());
  }
}

mqam::FsmcChannel make_channel(const mqam::ExperimentSpec& spec, int k) {
  try {
    return mqam::build_channel(spec, k);
  } catch (const std::invalid_argument& e) {
    throw mqam::SpecError(std::string("invalid channel: ") + e.what());
  }
}

void warn_channel(const mqam::FsmcChannel& channel) {
  const auto& d = channel.diagnostics();
  if (d.fast_fading_warning)
    std::cerr << "warning: normalized Doppler exceeds 0.01; the slow-fading premise is broken\n";
  if (!d.clamps.empty())
    std::cerr << "warning: " << d.clamps.size()
              << " channel state(s) had neighbour probabilities clamped\n";
}

template <typename T>
void write_table(const Common& c, const Json& spec, const std::string& name,
                 const mqam::StateTable<T>& table) {
  const fs::path dir(c.out_dir);
  if (use_csv(c))
    mqam::io::write_file(dir / (name + ".csv"),
                         mqam::io::csv_document(name, spec, mqam::io::table_csv(table)));
  else
    mqam::io::write_file(dir / (name + ".json"),
                         mqam::io::dump(mqam::io::document(name, spec, {{name, mqam::io::table_json(table)}})));
}

void write_json(const Common& c, const std::string& name, const Json& spec, const Json& payload) {
  mqam::io::write_file(fs::path(c.out_dir) / (name + ".json"),
                       mqam::io::dump(mqam::io::document(name, spec, payload)));
}

void write_structure(const Common& c, const Json& spec, const mqam::StructureReport& report) {
  write_json(c, "structure_report", spec, {{"structure", mqam::io::structure_json(report)}});
  if (use_csv(c))
    mqam::io::write_file(fs::path(c.out_dir) / "witnesses.csv",
                         mqam::io::csv_document("witnesses", spec,
                                                mqam::io::witnesses_csv(report)));
}

const char* mark(bool ok) { return ok ? "pass" : "FAIL"; }

void print_structure(const mqam::StructureReport& r) {
  std::printf("monotone in b      %s (%zu witnesses)\n", mark(r.monotone_b.ok),
              r.monotone_b.witnesses.size());
  std::printf("bounded marginal   %s (%zu witnesses)\n", mark(r.bounded_marginal.ok),
              r.bounded_marginal.witnesses.size());
  std::printf("monotone in h      %s (%zu witnesses)\n", mark(r.monotone_h.ok),
              r.monotone_h.witnesses.size());
  for (const auto& w : r.monotone_h.witnesses)
    std::printf("  theta(b=%d, h=%d) < theta(b=%d, h=%d)\n", w.b, w.h + 2, w.b, w.h + 1);
  std::printf("weight bound       %s (margin %s)\n", mark(r.corollary1.bound_ok),
              mqam::io::format_double(r.corollary1.margin()).c_str());
  std::printf("cost cross slack   %s (min %s)\n", mark(r.corollary1.slack_ok),
              mqam::io::format_double(r.corollary1.slack).c_str());
  std::printf("dominance          %s\n", mark(r.dominance.ok));
  if (r.q_submodular)
    std::printf("Q submodular       %s (%zu witnesses)\n", mark(r.q_submodular->ok),
                r.q_submodular->witnesses.size());
  if (r.q_lnatural)
    std::printf("Q L-natural        %s (%zu witnesses)\n", mark(r.q_lnatural->ok),
                r.q_lnatural->witnesses.size());
}

mqam::SolveResult run_solver(const mqam::SystemModel& model, mqam::Algorithm algorithm,
                             const mqam::SolverSpec& solver) {
  return mqam::solve(model, algorithm, solver.options());
}

// ------------------------------------------------------------------ solve

int cmd_solve(const Common& c) {
  const Loaded in = load(c);
  const auto& spec = in.spec;
  const auto channel = make_channel(spec, spec.channel.num_states);
  warn_channel(channel);
  const auto model = make_model(spec.system, channel);
  const auto result = run_solver(model, spec.solver.algorithm, spec.solver);
  const auto report = mqam::build_structure_report(model, result.policy, &result.values);

  write_json(c, "channel", in.resolved, {{"channel", mqam::io::channel_json(model.channel())}});
  write_json(c, "model", in.resolved, {{"model", mqam::io::model_json(model)}});
  write_table(c, in.resolved, "policy", result.policy);
  write_table(c, in.resolved, "values", result.values);
  write_json(c, "solve_report", in.resolved,
             {{"report", mqam::io::solve_report_json(result.report)}});
  write_structure(c, in.resolved, report);

  std::printf("%s: %d iterations, %.1f Q-evaluations per iteration\n",
              std::string(mqam::to_string(spec.solver.algorithm)).c_str(),
              result.report.iterations, result.report.mean_q_evals_per_iteration());
  print_structure(report);
  return report.unconditional_ok() ? kOk : kPropertyFailure;
}

// ---------------------------------------------------------------- compare

int cmd_compare(const Common& c, const std::string& states) {
  Loaded in = load(c);
  auto& spec = in.spec;
  if (!states.empty()) {
    int lo = 0, hi = 0;
    char sep = 0;
    std::istringstream is(states);
    if (!(is >> lo >> sep >> hi) || sep != ':' || lo < 1 || hi < lo || !is.eof())
      throw mqam::SpecError("--states: expected MIN:MAX with 1 <= MIN <= MAX");
    spec.compare.min_states = lo;
    spec.compare.max_states = hi;
    in.resolved = mqam::resolved_json(spec);
  }

  constexpr mqam::Algorithm kAll[] = {mqam::Algorithm::kValueIteration,
                                      mqam::Algorithm::kMpiSubmodular,
                                      mqam::Algorithm::kMpiLNatural};
  Json rows = Json::array();
  std::ostringstream csv;
  csv << "K,dp,mpi_sub,mpi_lnat,dp_per_state,mpi_sub_per_state,mpi_lnat_per_state,"
         "iterations_dp,iterations_mpi_sub,iterations_mpi_lnat,policies_equal,max_value_gap\n";
  bool all_equal = true;
  for (int k = spec.compare.min_states; k <= spec.compare.max_states; ++k) {
    const auto model = make_model(spec.system, make_channel(spec, k));
    std::vector<mqam::SolveResult> results;
    for (auto a : kAll) results.push_back(run_solver(model, a, spec.solver));
    bool equal = true;
    double gap = 0.0;
    for (std::size_t i = 1; i < results.size(); ++i) {
      equal = equal && results[i].policy == results[0].policy;
      for (std::size_t j = 0; j < results[0].values.data().size(); ++j)
        gap = std::max(gap, std::abs(results[i].values.data()[j] - results[0].values.data()[j]));
    }
    equal = equal && gap <= 10.0 * spec.solver.epsilon;
    all_equal = all_equal && equal;
    const double n = model.num_states();
    Json row = {{"K", k}, {"policies_equal", equal}, {"max_value_gap", gap}};
    csv << k;
    for (const auto& r : results) {
      row[std::string(mqam::to_string(r.report.algorithm))] = {
          {"q_evals_per_iteration", r.report.mean_q_evals_per_iteration()},
          {"q_evals_per_state", r.report.mean_q_evals_per_iteration() / n},
          {"iterations", r.report.iterations}};
      csv << ',' << mqam::io::format_double(r.report.mean_q_evals_per_iteration());
    }
    for (const auto& r : results)
      csv << ',' << mqam::io::format_double(r.report.mean_q_evals_per_iteration() / n);
    for (const auto& r : results) csv << ',' << r.report.iterations;
    csv << ',' << (equal ? 1 : 0) << ',' << mqam::io::format_double(gap) << "\n";
    rows.push_back(std::move(row));
    std::printf("K=%2d  dp %8.2f  mpi_sub %8.2f  mpi_lnat %8.2f  %s\n", k,
                results[0].report.mean_q_evals_per_iteration(),
                results[1].report.mean_q_evals_per_iteration(),
                results[2].report.mean_q_evals_per_iteration(),
                equal ? "policies equal" : "POLICIES DIFFER");
  }
  if (use_csv(c))
    mqam::io::write_file(fs::path(c.out_dir) / "compare.csv",
                         mqam::io::csv_document("compare", in.resolved, csv.str()));
  else
    write_json(c, "compare", in.resolved, {{"rows", rows}});
  return all_equal ? kOk : kPropertyFailure;
}

// ------------------------------------------------------------------ dspsa

int cmd_dspsa(const Common& c) {
  const Loaded in = load(c);
  const auto& spec = in.spec;
  const auto& cfg = spec.dspsa.config;
  const auto channel = make_channel(spec, spec.channel.num_states);
  warn_channel(channel);

  const auto regimes = mqam::dspsa_regimes(spec);
  std::optional<mqam::DspsaState> state;
  Json regime_rows = Json::array();
  mqam::ThresholdVector last_reference;
  for (const auto& regime : regimes) {
    const auto model = make_model(regime.system, channel);
    if (!state) state = mqam::DspsaState::start(model);
    const auto dp = run_solver(model, mqam::Algorithm::kValueIteration, spec.solver);
    const auto reference = mqam::policy_to_thresholds(dp.policy, model.max_action());
    const double optimum = mqam::total_value(dp.values);
    const int count = regime.last_iteration - regime.first_iteration + 1;
    mqam::dspsa_advance(model, cfg, *state, count, &reference);
    const auto estimate = mqam::project_estimate(*state);
    const double final_j = mqam::exact_objective(model, estimate);
    regime_rows.push_back({{"first_iteration", regime.first_iteration},
                           {"last_iteration", regime.last_iteration},
                           {"weight", regime.system.weight},
                           {"dp_optimum", optimum},
                           {"reference_thresholds", mqam::io::thresholds_json(reference)},
                           {"final_thresholds", mqam::io::thresholds_json(estimate)},
                           {"final_objective", final_j},
                           {"relative_gap", final_j / optimum - 1.0}});
    std::printf("iterations %d..%d  w=%s  J=%s  DP optimum=%s  gap=%.4f\n",
                regime.first_iteration, regime.last_iteration,
                mqam::io::format_double(regime.system.weight).c_str(),
                mqam::io::format_double(final_j).c_str(),
                mqam::io::format_double(optimum).c_str(), final_j / optimum - 1.0);
    last_reference = reference;
  }
  const auto estimate = mqam::project_estimate(*state);
  if (use_csv(c)) {
    mqam::io::write_file(fs::path(c.out_dir) / "trace.csv",
                         mqam::io::csv_document("trace", in.resolved,
                                                mqam::io::trace_csv(state->trace)));
    mqam::io::write_file(fs::path(c.out_dir) / "thresholds.csv",
                         mqam::io::csv_document("thresholds", in.resolved,
                                                mqam::io::thresholds_csv(estimate)));
  } else {
    write_json(c, "trace", in.resolved, {{"trace", mqam::io::trace_json(state->trace)}});
    write_json(c, "thresholds", in.resolved, {{"thresholds", mqam::io::thresholds_json(estimate)}});
  }
  write_json(c, "dspsa_summary", in.resolved,
             {{"regimes", regime_rows},
              {"iterations", state->iteration},
              {"simulations", state->simulations},
              {"clamp_iterations", state->clamp_iterations},
              {"divergence_suspected", state->divergence_suspected()},
              {"final_lambda", state->lambda},
              {"final_theta", state->theta}});
  if (state->divergence_suspected())
    std::cerr << "warning: estimate sat on the box boundary in more than half the iterations\n";
  return kOk;
}

// ------------------------------------------------------------------ check

int cmd_check(const Common& c) {
  const Loaded in = load(c);
  const auto& spec = in.spec;
  const auto channel = make_channel(spec, spec.channel.num_states);
  warn_channel(channel);
  const auto model = make_model(spec.system, channel);
  const auto result = run_solver(model, spec.solver.algorithm, spec.solver);
  const auto report = mqam::build_structure_report(model, result.policy, &result.values);
  write_structure(c, in.resolved, report);
  print_structure(report);
  return report.unconditional_ok() ? kOk : kPropertyFailure;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--spec", c.spec_path, "experiment spec (JSON)")->required();
  cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&c](const std::uint64_t& s) {
        c.seed = s;
        c.seed_given = true;
      },
      "overrides dspsa.seed");
  cmd->add_option("--format", c.format, "tabular output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive m-QAM scheduling MDP: solvers, structure checks and DSPSA"};
  app.set_version_flag("--version", std::string(mqam::kVersion));
  app.require_subcommand(1);

  Common common;
  std::string states;
  auto* solve = app.add_subcommand("solve", "solve the MDP and export policy, values and reports");
  auto* compare = app.add_subcommand("compare", "Q-evaluation counts of the three solvers over K");
  auto* dspsa = app.add_subcommand("dspsa", "approximate the optimal thresholds by DSPSA");
  auto* check = app.add_subcommand("check", "run every structural check on the solved instance");
  for (auto* cmd : {solve, compare, dspsa, check}) add_common(cmd, common);
  compare->add_option("--states", states, "channel state range MIN:MAX (default from spec, 2:10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kSpecError;
  }

  try {
    if (*solve) return cmd_solve(common);
    if (*compare) return cmd_compare(common, states);
    if (*dspsa) return cmd_dspsa(common);
    if (*check) return cmd_check(common);
  } catch (const mqam::SpecError& e) {
    std::cerr << "spec error: " << e.what() << "\n";
    return kSpecError;
  } catch (const mqam::NonConvergence& e) {
    std::cerr << "error: " << e.what() << " (last gap "
              << (e.report().sup_norm_trace.empty() ? 0.0 : e.report().sup_norm_trace.back())
              << ", epsilon " << e.report().epsilon << ")\n";
    return kNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSpecError;
  }
  return kOk;
}
