#pragma once

// JSON and CSV export of channels, models, solutions, structure reports and
// DSPSA traces. Channel states are written 1-based; queue states as-is.
// Every document carries the library version and the resolved experiment
// spec so that it can be regenerated.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mqam/dspsa.hpp"
#include "mqam/mdp.hpp"
#include "mqam/solvers.hpp"
#include "mqam/structure.hpp"
#include "mqam/version.hpp"

namespace mqam::io {

using Json = nlohmann::ordered_json;

/// Shortest text that round-trips the double; "nan" / "inf" for non-finite.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string hex64(std::uint64_t x) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, x);
  return buf;
}

inline Json matrix_json(std::span<const double> data, int rows, int cols) {
  Json out = Json::array();
  for (int r = 0; r < rows; ++r) {
    Json row = Json::array();
    for (int c = 0; c < cols; ++c) row.push_back(data[static_cast<std::size_t>(r * cols + c)]);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------- channel

inline Json channel_json(const FsmcChannel& channel) {
  const int k = channel.size();
  const auto& diag = channel.diagnostics();
  Json clamps = Json::array();
  for (const auto& c : diag.clamps)
    clamps.push_back({{"state", c.state + 1}, {"up_before", c.up_before},
                      {"down_before", c.down_before}});
  Json large = Json::array();
  for (int s : diag.large_offdiagonal_states) large.push_back(s + 1);
  return {
      {"num_states", k},
      {"average_snr", channel.average_snr()},
      {"boundaries", std::vector<double>(channel.boundaries().begin(), channel.boundaries().end())},
      {"stationary", std::vector<double>(channel.stationary().begin(), channel.stationary().end())},
      {"transition", matrix_json(channel.transition_data(), k, k)},
      {"clamp_events", std::move(clamps)},
      {"large_offdiagonal_states", std::move(large)},
      {"fast_fading_warning", diag.fast_fading_warning},
      {"transition_overridden", diag.transition_overridden},
  };
}

// ------------------------------------------------------------------ model

inline Json model_json(const SystemModel& model) {
  const auto& cfg = model.config();
  std::vector<double> snr;
  for (int h = 0; h < model.num_channel_states(); ++h) snr.push_back(model.transmission_snr(h));
  const bool substituted = model.channel().boundaries()[0] <= 0.0;
  Json out = {
      {"queue_size", cfg.queue_size},
      {"max_action", cfg.max_action},
      {"weight", cfg.weight},
      {"ber_constraint", cfg.ber_constraint},
      {"discount", cfg.discount},
      {"packet_bits", cfg.packet_bits ? Json(*cfg.packet_bits) : Json(nullptr)},
      {"arrival_pmf", cfg.arrivals.pmf},
      {"arrival_mean", cfg.arrivals.mean()},
      {"num_states", model.num_states()},
      {"transmission_snr", snr},
      {"lowest_state_snr_rule",
       substituted ? "rayleigh conditional median of the lowest region" : "lower boundary"},
      {"max_cost", model.max_cost()},
      {"cost_checksum", hex64(model.cost_checksum())},
  };
  return out;
}

// --------------------------------------------------------------- solution

template <typename T>
Json table_json(const StateTable<T>& table) {
  Json data = Json::array();
  for (int b = 0; b < table.num_queue(); ++b) {
    Json row = Json::array();
    for (int h = 0; h < table.num_channel(); ++h) row.push_back(table(b, h));
    data.push_back(std::move(row));
  }
  return {{"rows", "b"}, {"columns", "h"}, {"data", std::move(data)}};
}

inline std::string cell_text(int x) { return std::to_string(x); }
inline std::string cell_text(double x) { return format_double(x); }

template <typename T>
std::string table_csv(const StateTable<T>& table) {
  std::ostringstream os;
  os << "b";
  for (int h = 0; h < table.num_channel(); ++h) os << ",h" << h + 1;
  os << "\n";
  for (int b = 0; b < table.num_queue(); ++b) {
    os << b;
    for (int h = 0; h < table.num_channel(); ++h) os << ',' << cell_text(table(b, h));
    os << "\n";
  }
  return os.str();
}

inline Json solve_report_json(const SolveReport& r) {
  return {
      {"algorithm", std::string(to_string(r.algorithm))},
      {"iterations", r.iterations},
      {"converged", r.converged},
      {"epsilon", r.epsilon},
      {"q_evals_total", r.q_evals_total},
      {"q_evals_mean_per_iteration", r.mean_q_evals_per_iteration()},
      {"q_evals_per_iteration", r.q_evals_per_iteration},
      {"sup_norm_trace", r.sup_norm_trace},
  };
}

// -------------------------------------------------------------- structure

inline Json cells_json(const std::vector<Cell>& cells) {
  Json out = Json::array();
  for (const auto& c : cells) out.push_back({{"b", c.b}, {"h", c.h + 1}});
  return out;
}

inline Json cell_check_json(const CellCheck& c) {
  return {{"ok", c.ok}, {"witnesses", cells_json(c.witnesses)}};
}

inline Json q_check_json(const QCheck& q) {
  Json w = Json::array();
  for (const auto& x : q.witnesses)
    w.push_back({{"b", x.b}, {"h", x.h + 1}, {"a", x.a}, {"family", x.family}});
  return {{"ok", q.ok}, {"witness_count", q.witnesses.size()}, {"witnesses", std::move(w)}};
}

inline Json structure_json(const StructureReport& r) {
  const auto& c1 = r.corollary1;
  Json dominance_witnesses = Json::array();
  for (const auto& w : r.dominance.witnesses)
    dominance_witnesses.push_back({{"h", w.h + 1}, {"next", w.next + 1}});
  std::vector<Cell> violations = r.monotone_b.witnesses;
  violations.insert(violations.end(), r.bounded_marginal.witnesses.begin(),
                    r.bounded_marginal.witnesses.end());
  violations.insert(violations.end(), r.monotone_h.witnesses.begin(),
                    r.monotone_h.witnesses.end());
  Json out = {
      {"monotone_in_b", cell_check_json(r.monotone_b)},
      {"bounded_marginal", cell_check_json(r.bounded_marginal)},
      {"monotone_in_h", cell_check_json(r.monotone_h)},
      {"violations", cells_json(violations)},
      {"corollary1",
       {{"weight", c1.weight},
        {"bound", c1.bound},
        {"bound_state", c1.bound_state < 0 ? Json(nullptr) : Json(c1.bound_state + 1)},
        {"margin", c1.margin()},
        {"bound_ok", c1.bound_ok},
        {"cross_difference_slack", c1.slack},
        {"slack_state", c1.slack_state < 0 ? Json(nullptr) : Json(c1.slack_state + 1)},
        {"slack_action", c1.slack_action < 0 ? Json(nullptr) : Json(c1.slack_action)},
        {"slack_ok", c1.slack_ok}}},
      {"corollary1_margin", c1.margin()},
      {"dominance_ok", r.dominance.ok},
      {"dominance_witnesses", std::move(dominance_witnesses)},
      {"unconditional_ok", r.unconditional_ok()},
  };
  out["q_submodular"] = r.q_submodular ? q_check_json(*r.q_submodular) : Json(nullptr);
  out["q_lnatural"] = r.q_lnatural ? q_check_json(*r.q_lnatural) : Json(nullptr);
  return out;
}

/// One row per witness of every check: check,b,h,a,detail.
inline std::string witnesses_csv(const StructureReport& r) {
  std::ostringstream os;
  os << "check,b,h,a,detail\n";
  auto cells = [&](const char* name, const CellCheck& c) {
    for (const auto& w : c.witnesses) os << name << ',' << w.b << ',' << w.h + 1 << ",,\n";
  };
  cells("monotone_in_b", r.monotone_b);
  cells("bounded_marginal", r.bounded_marginal);
  cells("monotone_in_h", r.monotone_h);
  for (const auto& w : r.dominance.witnesses)
    os << "dominance,," << w.h + 1 << ",,next=" << w.next + 1 << "\n";
  auto q = [&](const char* name, const std::optional<QCheck>& c) {
    if (!c) return;
    for (const auto& w : c->witnesses)
      os << name << ',' << w.b << ',' << w.h + 1 << ',' << w.a << ',' << w.family << "\n";
  };
  q("q_submodular", r.q_submodular);
  q("q_lnatural", r.q_lnatural);
  return os.str();
}

// ------------------------------------------------------------------ dspsa

inline Json thresholds_json(const ThresholdVector& phi) {
  Json rows = Json::array();
  for (int h = 0; h < phi.num_channel(); ++h) {
    Json row = Json::array();
    for (int i = 1; i <= phi.max_action(); ++i) row.push_back(phi.at(h, i));
    rows.push_back(std::move(row));
  }
  return {{"rows", "h"}, {"columns", "i"}, {"never", phi.never()}, {"data", std::move(rows)}};
}

inline std::string thresholds_csv(const ThresholdVector& phi) {
  std::ostringstream os;
  os << "h";
  for (int i = 1; i <= phi.max_action(); ++i) os << ",i" << i;
  os << "\n";
  for (int h = 0; h < phi.num_channel(); ++h) {
    os << h + 1;
    for (int i = 1; i <= phi.max_action(); ++i) os << ',' << phi.at(h, i);
    os << "\n";
  }
  return os.str();
}

inline std::string trace_csv(const std::vector<DspsaTraceRow>& trace) {
  std::ostringstream os;
  os << "n,a_n,r_n,J_rounded,normalized_error,max_lambda,clamp_flag\n";
  for (const auto& r : trace)
    os << r.n << ',' << format_double(r.step) << ',' << format_double(r.penalty) << ','
       << format_double(r.objective) << ',' << format_double(r.normalized_error) << ','
       << format_double(r.max_lambda) << ',' << (r.clamped ? 1 : 0) << "\n";
  return os.str();
}

inline Json trace_json(const std::vector<DspsaTraceRow>& trace) {
  Json out = Json::array();
  for (const auto& r : trace)
    out.push_back({{"n", r.n},
                   {"a_n", r.step},
                   {"r_n", r.penalty},
                   {"J_rounded", r.objective},
                   {"normalized_error", r.normalized_error},
                   {"max_lambda", r.max_lambda},
                   {"clamp_flag", r.clamped}});
  return out;
}

// -------------------------------------------------------------- envelopes

/// {"artifact", "version", "kind", "spec", ...payload}.
inline Json document(const std::string& kind, const Json& spec, const Json& payload) {
  Json out = {{"artifact", "mqam"}, {"version", kVersion}, {"kind", kind}, {"spec", spec}};
  for (auto it = payload.begin(); it != payload.end(); ++it) out[it.key()] = it.value();
  return out;
}

inline std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

/// '#'-prefixed provenance lines ahead of a CSV body.
inline std::string csv_document(const std::string& kind, const Json& spec,
                                const std::string& body) {
  return "# mqam " + std::string(kVersion) + " " + kind + "\n# spec " + spec.dump() + "\n" + body;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace mqam::io
