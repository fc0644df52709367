#pragma once

// Experiment specs: a JSON document with `channel`, `system`, `solver`,
// `dspsa`, `compare` and `overrides` sections. Parsing rejects unknown keys
// and reports problems as source:line:column. The resolved form (every
// default filled in) is itself a valid spec and is embedded in all outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iterator>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mqam/channel.hpp"
#include "mqam/dspsa.hpp"
#include "mqam/mdp.hpp"
#include "mqam/solvers.hpp"

namespace mqam {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChannelSpec {
  double average_snr_db = 0.0;
  double doppler_hz = 10.0;
  double epoch_seconds = 1e-3;
  int num_states = 8;

  ChannelParams params() const {
    return {db_to_linear(average_snr_db), doppler_hz, epoch_seconds, num_states};
  }
};

struct ArrivalSpec {
  enum class Kind { kPoisson, kExplicit };
  Kind kind = Kind::kPoisson;
  double rate = 3.0;
  std::vector<double> pmf;
  Truncation truncation = Truncation::kRenormalize;
};

struct SystemSpec {
  int queue_size = 15;
  int max_action = 5;
  double weight = 1.0;
  double ber_constraint = 1e-3;
  double discount = 0.95;
  std::optional<int> packet_bits;
  ArrivalSpec arrivals;
};

struct SolverSpec {
  Algorithm algorithm = Algorithm::kValueIteration;
  double epsilon = 1e-4;
  /// Defaults to the cap derived from epsilon and the discount factor.
  std::optional<int> max_iterations;

  SolveOptions options() const {
    SolveOptions o;
    o.epsilon = epsilon;
    o.max_iterations = max_iterations;
    return o;
  }
};

/// From iteration `at_iteration + 1` on, the system fields in `patch` apply.
struct SchedulePoint {
  int at_iteration = 0;
  nlohmann::ordered_json patch;
  SystemSpec system;  // resolved regime
};

struct DspsaSpec {
  DspsaConfig config;
  std::vector<SchedulePoint> schedule;
};

struct CompareSpec {
  int min_states = 2;
  int max_states = 10;
};

struct ExperimentSpec {
  ChannelSpec channel;
  SystemSpec system;
  SolverSpec solver;
  DspsaSpec dspsa;
  CompareSpec compare;
  /// Row-major KxK replacement for the constructed transition matrix.
  std::optional<std::vector<double>> channel_transition;
  /// Individual rows replaced after construction (state index 0-based).
  std::vector<std::pair<int, std::vector<double>>> channel_rows;
};

namespace detail {

using Json = nlohmann::ordered_json;

/// Input iterator that publishes how far the parser has read.
struct TrackedIterator {
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  const char* p = nullptr;
  const char** cursor = nullptr;

  reference operator*() const { return *p; }
  TrackedIterator& operator++() {
    ++p;
    *cursor = p;
    return *this;
  }
  TrackedIterator operator++(int) {
    TrackedIterator old = *this;
    ++*this;
    return old;
  }
  bool operator==(const TrackedIterator& o) const { return p == o.p; }
  bool operator!=(const TrackedIterator& o) const { return p != o.p; }
};

/// SAX consumer that builds the DOM and remembers the byte offset at which
/// every member and array element was read, keyed by JSON pointer.
class LocatingSax {
 public:
  LocatingSax(const char* base, const char* const* cursor) : base_(base), cursor_(cursor) {}

  bool null() { return add(nullptr); }
  bool boolean(bool v) { return add(v); }
  bool number_integer(Json::number_integer_t v) { return add(v); }
  bool number_unsigned(Json::number_unsigned_t v) { return add(v); }
  bool number_float(Json::number_float_t v, const std::string&) { return add(v); }
  bool string(std::string& v) { return add(v); }
  bool binary(Json::binary_t&) { return false; }
  bool start_object(std::size_t) { return open(Json::object()); }
  bool start_array(std::size_t) { return open(Json::array()); }
  bool end_object() { return close(); }
  bool end_array() { return close(); }
  bool key(std::string& k) {
    key_ = k;
    offsets[paths_.back() + "/" + escape(k)] = offset();
    return true;
  }
  bool parse_error(std::size_t position, const std::string&,
                   const nlohmann::detail::exception& ex) {
    error_position = position;
    error_message = ex.what();
    return false;
  }

  Json root;
  std::map<std::string, std::size_t> offsets;
  std::size_t error_position = 0;
  std::string error_message;

 private:
  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  std::size_t offset() const { return static_cast<std::size_t>(*cursor_ - base_); }

  /// Places `v` in the current container; returns its slot and path.
  std::pair<Json*, std::string> place(Json v) {
    if (stack_.empty()) {
      root = std::move(v);
      offsets[""] = offset();
      return {&root, ""};
    }
    Json& top = *stack_.back();
    if (top.is_array()) {
      const std::string path = paths_.back() + "/" + std::to_string(top.size());
      offsets[path] = offset();
      top.push_back(std::move(v));
      return {&top.back(), path};
    }
    const std::string path = paths_.back() + "/" + escape(key_);
    top[key_] = std::move(v);
    return {&top[key_], path};
  }

  bool add(Json v) {
    place(std::move(v));
    return true;
  }
  bool open(Json v) {
    auto [slot, path] = place(std::move(v));
    stack_.push_back(slot);
    paths_.push_back(path);
    return true;
  }
  bool close() {
    stack_.pop_back();
    paths_.pop_back();
    return true;
  }

  const char* base_;
  const char* const* cursor_;
  std::vector<Json*> stack_;
  std::vector<std::string> paths_;
  std::string key_;
};

struct Located {
  Json root;
  std::map<std::string, std::size_t> offsets;
  std::string_view text;
  std::string source;

  std::string where(std::size_t offset) const {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    return source + ":" + std::to_string(line) + ":" + std::to_string(col);
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
    auto it = offsets.find(pointer);
    std::string path = pointer.empty() ? "/" : pointer;
    if (it == offsets.end()) throw SpecError(source + ": " + path + ": " + message);
    throw SpecError(where(it->second) + ": " + path + ": " + message);
  }
};

inline Located locate(std::string_view text, std::string source) {
  const char* cursor = text.data();
  LocatingSax sax(text.data(), &cursor);
  TrackedIterator first{text.data(), &cursor};
  TrackedIterator last{text.data() + text.size(), &cursor};
  Located out;
  out.text = text;
  out.source = std::move(source);
  if (!Json::sax_parse(first, last, &sax)) {
    const std::size_t at = sax.error_position > 0 ? sax.error_position - 1 : 0;
    std::string message = sax.error_message;
    if (auto p = message.find("parse error"); p != std::string::npos) message = message.substr(p);
    throw SpecError(out.where(at) + ": " + message);
  }
  out.root = std::move(sax.root);
  out.offsets = std::move(sax.offsets);
  return out;
}

/// Typed, default-aware view of one JSON object in the spec.
class Section {
 public:
  Section(const Located& doc, const Json* node, std::string pointer,
          std::initializer_list<std::string_view> allowed)
      : doc_(doc), node_(node), pointer_(std::move(pointer)) {
    if (!node_) return;
    if (!node_->is_object()) doc_.fail(pointer_, "expected an object");
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      bool known = false;
      for (auto a : allowed) known = known || a == it.key();
      if (!known) {
        std::string list;
        for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        doc_.fail(child(it.key()), "unknown key '" + it.key() + "' (allowed: " + list + ")");
      }
    }
  }

  std::string child(std::string_view key) const { return pointer_ + "/" + std::string(key); }
  const Json* find(std::string_view key) const {
    if (!node_) return nullptr;
    auto it = node_->find(std::string(key));
    return it == node_->end() ? nullptr : &*it;
  }
  bool has(std::string_view key) const { return find(key) != nullptr; }
  [[noreturn]] void fail(std::string_view key, const std::string& message) const {
    doc_.fail(key.empty() ? pointer_ : child(key), message);
  }
  [[noreturn]] void fail_here(const std::string& message) const { doc_.fail(pointer_, message); }

  double number(std::string_view key, double fallback) const {
    const Json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }

  std::int64_t integer(std::string_view key, std::int64_t fallback) const {
    const Json* v = find(key);
    if (!v) return fallback;
    if (v->is_number_integer()) return v->get<std::int64_t>();
    if (v->is_number_float()) {
      const double d = v->get<double>();
      if (d == static_cast<double>(static_cast<std::int64_t>(d)))
        return static_cast<std::int64_t>(d);
    }
    fail(key, "expected an integer");
  }

  int int32(std::string_view key, int fallback) const {
    const std::int64_t v = integer(key, fallback);
    if (v < INT32_MIN || v > INT32_MAX) fail(key, "integer out of range");
    return static_cast<int>(v);
  }

  std::uint64_t unsigned64(std::string_view key, std::uint64_t fallback) const {
    const Json* v = find(key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    fail(key, "expected a nonnegative integer");
  }

  bool boolean(std::string_view key, bool fallback) const {
    const Json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::string string(std::string_view key, std::string fallback) const {
    const Json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(std::string_view key) const {
    const Json* v = find(key);
    if (!v || !v->is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : *v) {
      if (!x.is_number()) fail(key, "expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  Section object(std::string_view key, std::initializer_list<std::string_view> allowed) const {
    return Section(doc_, find(key), child(key), allowed);
  }

  const Located& doc() const { return doc_; }
  const std::string& pointer() const { return pointer_; }

 private:
  const Located& doc_;
  const Json* node_;
  std::string pointer_;
};

inline void check(bool ok, const Section& s, std::string_view key, const std::string& message) {
  if (!ok) s.fail(key, message);
}

inline ArrivalSpec parse_arrivals(const Section& s, ArrivalSpec out, int queue_size) {
  const std::string kind =
      s.string("kind", out.kind == ArrivalSpec::Kind::kPoisson ? "poisson" : "explicit");
  if (kind == "poisson") {
    out.kind = ArrivalSpec::Kind::kPoisson;
    if (s.has("pmf")) s.fail("pmf", "'pmf' is only valid with kind \"explicit\"");
    out.rate = s.number("rate", out.rate);
    check(out.rate >= 0.0 && std::isfinite(out.rate), s, "rate", "rate must be >= 0");
    const std::string t = s.string(
        "truncation", out.truncation == Truncation::kRenormalize ? "renormalize" : "lump_tail");
    if (t == "renormalize") out.truncation = Truncation::kRenormalize;
    else if (t == "lump_tail") out.truncation = Truncation::kLumpTail;
    else s.fail("truncation", "expected \"renormalize\" or \"lump_tail\"");
    out.pmf.clear();
  } else if (kind == "explicit") {
    out.kind = ArrivalSpec::Kind::kExplicit;
    if (s.has("rate")) s.fail("rate", "'rate' is only valid with kind \"poisson\"");
    if (s.has("truncation")) s.fail("truncation", "'truncation' is only valid with kind \"poisson\"");
    if (s.has("pmf")) out.pmf = s.numbers("pmf");
    if (out.pmf.empty()) s.fail("pmf", "explicit arrivals need a pmf");
    try {
      ArrivalDist{out.pmf}.validate();
    } catch (const std::invalid_argument& e) {
      s.fail("pmf", e.what());
    }
    // Shorter pmfs are padded with zeros up to L_B.
    if (out.pmf.size() > static_cast<std::size_t>(queue_size) + 1)
      s.fail("pmf", "pmf support exceeds {0..queue_size}");
  } else {
    s.fail("kind", "expected \"poisson\" or \"explicit\"");
  }
  return out;
}

/// Scalars that may change between DSPSA regimes.
inline void parse_system_scalars(const Section& s, SystemSpec& out) {
  out.weight = s.number("weight", out.weight);
  check(out.weight > 0.0 && std::isfinite(out.weight), s, "weight", "weight must be > 0");
  out.ber_constraint = s.number("ber_constraint", out.ber_constraint);
  check(out.ber_constraint > 0.0 && out.ber_constraint <= 0.2, s, "ber_constraint",
        "ber_constraint must lie in (0, 0.2]");
  out.discount = s.number("discount", out.discount);
  check(out.discount >= 0.0 && out.discount < 1.0, s, "discount", "discount must lie in [0, 1)");
  if (s.has("arrivals"))
    out.arrivals = parse_arrivals(s.object("arrivals", {"kind", "rate", "pmf", "truncation"}), out.arrivals, out.queue_size);
  else if (out.arrivals.kind == ArrivalSpec::Kind::kExplicit &&
           out.arrivals.pmf.size() > static_cast<std::size_t>(out.queue_size) + 1)
    s.fail("queue_size", "explicit arrival pmf support exceeds {0..queue_size}");
}

}  // namespace detail

inline ExperimentSpec parse_spec(std::string_view text, const std::string& source = "<spec>") {
  using detail::check;
  using detail::Section;
  const detail::Located doc = detail::locate(text, source);
  ExperimentSpec spec;

  const Section root(doc, &doc.root, "",
                     {"channel", "system", "solver", "dspsa", "compare", "overrides"});

  const Section ch =
      root.object("channel", {"average_snr_db", "doppler_hz", "epoch_seconds", "num_states"});
  spec.channel.average_snr_db = ch.number("average_snr_db", spec.channel.average_snr_db);
  check(std::isfinite(spec.channel.average_snr_db), ch, "average_snr_db", "must be finite");
  spec.channel.doppler_hz = ch.number("doppler_hz", spec.channel.doppler_hz);
  check(spec.channel.doppler_hz >= 0.0 && std::isfinite(spec.channel.doppler_hz), ch,
        "doppler_hz", "doppler_hz must be >= 0");
  spec.channel.epoch_seconds = ch.number("epoch_seconds", spec.channel.epoch_seconds);
  check(spec.channel.epoch_seconds > 0.0 && std::isfinite(spec.channel.epoch_seconds), ch,
        "epoch_seconds", "epoch_seconds must be > 0");
  spec.channel.num_states = ch.int32("num_states", spec.channel.num_states);
  check(spec.channel.num_states >= 1, ch, "num_states", "num_states must be >= 1");

  const Section sys = root.object("system", {"queue_size", "max_action", "weight",
                                             "ber_constraint", "discount", "packet_bits",
                                             "arrivals"});
  spec.system.queue_size = sys.int32("queue_size", spec.system.queue_size);
  check(spec.system.queue_size >= 0, sys, "queue_size", "queue_size must be >= 0");
  spec.system.max_action = sys.int32("max_action", spec.system.max_action);
  check(spec.system.max_action >= 0 && spec.system.max_action <= spec.system.queue_size, sys,
        "max_action", "max_action must lie in [0, queue_size]");
  if (const auto* pb = sys.find("packet_bits"); pb && !pb->is_null()) {
    spec.system.packet_bits = sys.int32("packet_bits", 0);
    check(*spec.system.packet_bits > 0, sys, "packet_bits", "packet_bits must be > 0");
  }
  detail::parse_system_scalars(sys, spec.system);

  const Section sol = root.object("solver", {"algorithm", "epsilon", "max_iterations"});
  try {
    spec.solver.algorithm = parse_algorithm(sol.string("algorithm", "dp"));
  } catch (const std::invalid_argument& e) {
    sol.fail("algorithm", e.what());
  }
  spec.solver.epsilon = sol.number("epsilon", spec.solver.epsilon);
  check(spec.solver.epsilon > 0.0, sol, "epsilon", "epsilon must be > 0");
  if (sol.has("max_iterations")) {
    spec.solver.max_iterations = sol.int32("max_iterations", 0);
    check(*spec.solver.max_iterations >= 1, sol, "max_iterations", "max_iterations must be >= 1");
  }

  const Section ds = root.object(
      "dspsa", {"A", "B", "alpha1", "alpha2", "R", "iterations", "seed", "sim_tolerance",
                "sim_patience", "common_random_numbers", "trace_exact_objective", "schedule"});
  auto& cfg = spec.dspsa.config;
  cfg.A = ds.number("A", cfg.A);
  cfg.B = ds.number("B", cfg.B);
  cfg.alpha1 = ds.number("alpha1", cfg.alpha1);
  cfg.alpha2 = ds.number("alpha2", cfg.alpha2);
  cfg.R = ds.number("R", cfg.R);
  cfg.iterations = ds.int32("iterations", cfg.iterations);
  cfg.seed = ds.unsigned64("seed", cfg.seed);
  cfg.sim.tolerance = ds.number("sim_tolerance", cfg.sim.tolerance);
  cfg.sim.patience = ds.int32("sim_patience", cfg.sim.patience);
  cfg.common_random_numbers = ds.boolean("common_random_numbers", cfg.common_random_numbers);
  cfg.trace_exact_objective = ds.boolean("trace_exact_objective", cfg.trace_exact_objective);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    ds.fail_here(e.what());
  }
  if (const auto* sched = ds.find("schedule")) {
    if (!sched->is_array()) ds.fail("schedule", "expected an array");
    SystemSpec regime = spec.system;
    int last = 0;
    for (std::size_t i = 0; i < sched->size(); ++i) {
      const Section entry(doc, &(*sched)[i], ds.child("schedule") + "/" + std::to_string(i),
                          {"at_iteration", "system"});
      SchedulePoint point;
      if (!entry.has("at_iteration")) entry.fail_here("missing 'at_iteration'");
      point.at_iteration = entry.int32("at_iteration", 0);
      check(point.at_iteration > last && point.at_iteration < cfg.iterations, entry,
            "at_iteration",
            "at_iteration must increase strictly and lie inside (0, iterations)");
      last = point.at_iteration;
      if (!entry.has("system")) entry.fail_here("missing 'system'");
      const Section patch = entry.object(
          "system", {"weight", "ber_constraint", "discount", "arrivals"});
      detail::parse_system_scalars(patch, regime);
      point.patch = *entry.find("system");
      point.system = regime;
      spec.dspsa.schedule.push_back(std::move(point));
    }
  }

  const Section cmp = root.object("compare", {"min_states", "max_states"});
  spec.compare.min_states = cmp.int32("min_states", spec.compare.min_states);
  spec.compare.max_states = cmp.int32("max_states", spec.compare.max_states);
  check(spec.compare.min_states >= 1, cmp, "min_states", "min_states must be >= 1");
  check(spec.compare.max_states >= spec.compare.min_states, cmp, "max_states",
        "max_states must be >= min_states");

  const Section ov = root.object("overrides", {"channel_transition", "channel_rows"});
  auto read_row = [&](const detail::Json& row, const std::string& rp, std::vector<double>& out) {
    const int k = spec.channel.num_states;
    if (!row.is_array() || row.size() != static_cast<std::size_t>(k))
      doc.fail(rp, "expected a row of " + std::to_string(k) + " numbers");
    double sum = 0.0;
    for (const auto& x : row) {
      if (!x.is_number()) doc.fail(rp, "expected numbers");
      const double p = x.get<double>();
      if (!(p >= 0.0 && p <= 1.0)) doc.fail(rp, "entries must lie in [0, 1]");
      sum += p;
      out.push_back(p);
    }
    if (std::abs(sum - 1.0) > FsmcChannel::kRowTolerance) doc.fail(rp, "row does not sum to 1");
  };
  if (const auto* m = ov.find("channel_transition")) {
    const int k = spec.channel.num_states;
    const std::string ptr = ov.child("channel_transition");
    if (!m->is_array() || m->size() != static_cast<std::size_t>(k))
      doc.fail(ptr, "expected " + std::to_string(k) + " rows (channel.num_states)");
    std::vector<double> flat;
    for (std::size_t r = 0; r < m->size(); ++r)
      read_row((*m)[r], ptr + "/" + std::to_string(r), flat);
    spec.channel_transition = std::move(flat);
  }
  if (const auto* rows = ov.find("channel_rows")) {
    const std::string ptr = ov.child("channel_rows");
    if (!rows->is_array()) doc.fail(ptr, "expected an array of {state, row} objects");
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const Section entry(doc, &(*rows)[i], ptr + "/" + std::to_string(i), {"state", "row"});
      if (!entry.has("state") || !entry.has("row")) entry.fail_here("needs 'state' and 'row'");
      const int state = entry.int32("state", 0);
      check(state >= 1 && state <= spec.channel.num_states, entry, "state",
            "state must lie in 1..num_states");
      for (const auto& prev : spec.channel_rows)
        if (prev.first == state - 1) entry.fail("state", "row overridden twice");
      std::vector<double> row;
      read_row(*entry.find("row"), entry.child("row"), row);
      spec.channel_rows.emplace_back(state - 1, std::move(row));
    }
  }
  return spec;
}

// ----------------------------------------------------------------- resolve

inline nlohmann::ordered_json arrivals_json(const ArrivalSpec& a) {
  if (a.kind == ArrivalSpec::Kind::kPoisson)
    return {{"kind", "poisson"},
            {"rate", a.rate},
            {"truncation", a.truncation == Truncation::kRenormalize ? "renormalize" : "lump_tail"}};
  return {{"kind", "explicit"}, {"pmf", a.pmf}};
}

/// Fully resolved spec; parse_spec(resolved_json(s).dump()) reproduces `s`.
inline nlohmann::ordered_json resolved_json(const ExperimentSpec& s) {
  using J = nlohmann::ordered_json;
  J system = {{"queue_size", s.system.queue_size},
              {"max_action", s.system.max_action},
              {"weight", s.system.weight},
              {"ber_constraint", s.system.ber_constraint},
              {"discount", s.system.discount}};
  if (s.system.packet_bits) system["packet_bits"] = *s.system.packet_bits;
  system["arrivals"] = arrivals_json(s.system.arrivals);

  const auto& c = s.dspsa.config;
  J schedule = J::array();
  for (const auto& p : s.dspsa.schedule)
    schedule.push_back({{"at_iteration", p.at_iteration}, {"system", p.patch}});

  J out = {
      {"channel",
       {{"average_snr_db", s.channel.average_snr_db},
        {"doppler_hz", s.channel.doppler_hz},
        {"epoch_seconds", s.channel.epoch_seconds},
        {"num_states", s.channel.num_states}}},
      {"system", std::move(system)},
      {"solver", {{"algorithm", std::string(to_string(s.solver.algorithm))},
                  {"epsilon", s.solver.epsilon}}},
      {"dspsa",
       {{"A", c.A},
        {"B", c.B},
        {"alpha1", c.alpha1},
        {"alpha2", c.alpha2},
        {"R", c.R},
        {"iterations", c.iterations},
        {"seed", c.seed},
        {"sim_tolerance", c.sim.tolerance},
        {"sim_patience", c.sim.patience},
        {"common_random_numbers", c.common_random_numbers},
        {"trace_exact_objective", c.trace_exact_objective},
        {"schedule", std::move(schedule)}}},
      {"compare", {{"min_states", s.compare.min_states}, {"max_states", s.compare.max_states}}},
  };
  if (s.solver.max_iterations) out["solver"]["max_iterations"] = *s.solver.max_iterations;
  if (s.channel_transition) {
    const int k = s.channel.num_states;
    J rows = J::array();
    for (int r = 0; r < k; ++r) {
      J row = J::array();
      for (int j = 0; j < k; ++j) row.push_back((*s.channel_transition)[static_cast<std::size_t>(r * k + j)]);
      rows.push_back(std::move(row));
    }
    out["overrides"]["channel_transition"] = std::move(rows);
  }
  if (!s.channel_rows.empty()) {
    J rows = J::array();
    for (const auto& [state, row] : s.channel_rows)
      rows.push_back({{"state", state + 1}, {"row", row}});
    out["overrides"]["channel_rows"] = std::move(rows);
  }
  return out;
}

// ------------------------------------------------------------------- build

inline FsmcChannel build_channel(const ExperimentSpec& s, int num_states) {
  ChannelParams params = s.channel.params();
  params.num_states = num_states;
  FsmcChannel channel = build_fsmc(params);
  if (num_states != s.channel.num_states) return channel;
  if (!s.channel_transition && s.channel_rows.empty()) return channel;
  std::vector<double> p = s.channel_transition.value_or(std::vector<double>(
      channel.transition_data().begin(), channel.transition_data().end()));
  for (const auto& [state, row] : s.channel_rows)
    std::copy(row.begin(), row.end(), p.begin() + static_cast<std::ptrdiff_t>(state * num_states));
  return channel.with_transition(std::move(p));
}

inline FsmcChannel build_channel(const ExperimentSpec& s) {
  return build_channel(s, s.channel.num_states);
}

inline ArrivalDist build_arrivals(const ArrivalSpec& a, int queue_size) {
  if (a.kind == ArrivalSpec::Kind::kPoisson)
    return make_poisson_arrivals(a.rate, queue_size, a.truncation);
  std::vector<double> pmf = a.pmf;
  pmf.resize(static_cast<std::size_t>(queue_size) + 1, 0.0);
  return {pmf};
}

inline SystemConfig build_config(const SystemSpec& sys, FsmcChannel channel) {
  return SystemConfig{.queue_size = sys.queue_size,
                      .max_action = sys.max_action,
                      .weight = sys.weight,
                      .ber_constraint = sys.ber_constraint,
                      .discount = sys.discount,
                      .arrivals = build_arrivals(sys.arrivals, sys.queue_size),
                      .channel = std::move(channel),
                      .packet_bits = sys.packet_bits};
}

inline SystemModel build_model(const ExperimentSpec& s) {
  return SystemModel(build_config(s.system, build_channel(s)));
}

/// Iteration ranges and system of every DSPSA regime, in order.
struct Regime {
  int first_iteration = 1;
  int last_iteration = 0;
  SystemSpec system;
};

inline std::vector<Regime> dspsa_regimes(const ExperimentSpec& s) {
  std::vector<Regime> out;
  Regime current{1, s.dspsa.config.iterations, s.system};
  for (const auto& p : s.dspsa.schedule) {
    current.last_iteration = p.at_iteration;
    out.push_back(current);
    current = {p.at_iteration + 1, s.dspsa.config.iterations, p.system};
  }
  out.push_back(current);
  return out;
}

}  // namespace mqam
