#pragma once

// Discrete simultaneous perturbation stochastic approximation over queue
// threshold vectors, with an augmented-Lagrangian treatment of the row
// ordering constraints and a trajectory simulator for the noisy objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "mqam/random.hpp"
#include "mqam/solvers.hpp"
#include "mqam/structure.hpp"

namespace mqam {

struct SimulationControls {
  double tolerance = 1e-4;
  int patience = 10;
};

struct DspsaConfig {
  double A = 0.015;
  double B = 100.0;
  double alpha1 = 0.602;
  double alpha2 = 0.1;
  double R = 10.0;
  int iterations = 5000;
  std::uint64_t seed = 1;
  SimulationControls sim;
  bool common_random_numbers = true;
  /// Record the exact objective of the rounded estimate in the trace.
  bool trace_exact_objective = true;

  void validate() const {
    if (!(A > 0.0) || !(B > 0.0) || !(R > 0.0))
      throw std::invalid_argument("dspsa: A, B and R must be > 0");
    if (!(alpha1 > 0.0 && alpha1 <= 1.0))
      throw std::invalid_argument("dspsa: alpha1 must lie in (0, 1]");
    if (!(alpha2 >= 0.0)) throw std::invalid_argument("dspsa: alpha2 must be >= 0");
    if (iterations < 0) throw std::invalid_argument("dspsa: iterations must be >= 0");
    if (!(sim.tolerance > 0.0)) throw std::invalid_argument("dspsa: sim_tolerance must be > 0");
    if (sim.patience < 1) throw std::invalid_argument("dspsa: sim_patience must be >= 1");
  }

  double step_size(int n) const { return A / std::pow(B + n, alpha1); }
  double penalty(int n) const { return R * std::pow(static_cast<double>(n), alpha2); }
};

/// Hard cap on trajectory length: beyond it the discounted tail is below
/// tolerance even at the largest immediate cost.
inline int simulation_horizon(const SystemModel& model, const SimulationControls& controls) {
  const double beta = model.discount();
  const double c_max = model.max_cost();
  if (beta <= 0.0 || !(c_max > 0.0)) return 0;
  const double n = std::log(controls.tolerance * (1.0 - beta) / c_max) / std::log(beta);
  return n > 0.0 ? static_cast<int>(std::ceil(n)) : 0;
}

/// Noisy estimate of sum_x V_theta(x): one simulated trajectory per initial
/// state. The trajectory from state s draws from a stream seeded by
/// (stream_seed, s), so equal seeds give identical draws.
class TrajectorySimulator {
 public:
  TrajectorySimulator(const SystemModel& model, SimulationControls controls = {})
      : model_(model), controls_(controls), horizon_(simulation_horizon(model, controls)) {}

  int horizon() const { return horizon_; }
  const SystemModel& model() const { return model_; }

  double trajectory(const Policy& policy, int b, int h, std::uint64_t seed) const {
    Rng rng(seed);
    const double beta = model_.discount();
    const auto arrivals = model_.arrival_cdf();
    const int top = model_.queue_size();
    double disc = 1.0;
    double total = 0.0;
    int quiet = 0;
    for (int t = 0; t <= horizon_; ++t) {
      const int a = policy(b, h);
      const double inc = disc * model_.cost(b, h, a);
      total += inc;
      quiet = inc < controls_.tolerance ? quiet + 1 : 0;
      if (quiet >= controls_.patience) break;
      disc *= beta;
      if (disc == 0.0) break;
      const int f = static_cast<int>(draw_from_cdf(arrivals, uniform01(rng)));
      b = std::min(std::max(b - a, 0) + f, top);
      h = static_cast<int>(draw_from_cdf(model_.channel().row_cdf(h), uniform01(rng)));
    }
    return total;
  }

  double j_hat(const Policy& policy, std::uint64_t stream_seed) const {
    double sum = 0.0;
    int s = 0;
    for (int b = 0; b < model_.num_queue_states(); ++b)
      for (int h = 0; h < model_.num_channel_states(); ++h, ++s)
        sum += trajectory(policy, b, h, derive_seed(stream_seed, static_cast<std::uint64_t>(s)));
    return sum;
  }

 private:
  const SystemModel& model_;
  SimulationControls controls_;
  int horizon_;
};

inline double simulate_j_hat(const SystemModel& model, const ThresholdVector& phi,
                             std::uint64_t stream_seed, const SimulationControls& controls = {}) {
  return TrajectorySimulator(model, controls).j_hat(thresholds_to_policy_lenient(phi), stream_seed);
}

/// Exact objective sum_x V_theta(x) of the policy encoded by `phi`.
inline double exact_objective(const SystemModel& model, const ThresholdVector& phi) {
  return total_value(evaluate_policy(model, thresholds_to_policy_lenient(phi)));
}

/// Independent +-1 entries with probability 1/2 each.
inline std::vector<int> draw_perturbation(std::size_t dimension, Rng& rng) {
  std::vector<int> delta(dimension);
  for (auto& d : delta) d = (rng() >> 63) ? 1 : -1;
  return delta;
}

/// Integer base point floor(theta).
inline ThresholdVector floor_point(std::span<const double> theta, int num_channel, int max_action,
                                   int queue_size) {
  ThresholdVector out(num_channel, max_action, queue_size);
  for (std::size_t d = 0; d < theta.size(); ++d)
    out.values()[d] = static_cast<int>(std::floor(theta[d]));
  return out;
}

/// Two-evaluation gradient estimate at the unit hypercube anchored at
/// `base`: g_d = (J(base + (1+delta)/2) - J(base + (1-delta)/2)) / delta_d.
/// The value type follows the objective, so an exact-arithmetic objective
/// gives an exact estimate.
template <typename Objective,
          typename Value = std::decay_t<std::invoke_result_t<Objective&, const ThresholdVector&>>>
std::vector<Value> dspsa_gradient(Objective&& objective, const ThresholdVector& base,
                                  std::span<const int> delta) {
  if (delta.size() != base.dimension())
    throw std::invalid_argument("dspsa_gradient: perturbation has wrong dimension");
  ThresholdVector plus = base;
  ThresholdVector minus = base;
  for (std::size_t d = 0; d < delta.size(); ++d) {
    if (delta[d] > 0)
      ++plus.values()[d];
    else
      ++minus.values()[d];
  }
  const Value j_plus = objective(plus);
  const Value j_minus = objective(minus);
  const Value diff = j_plus - j_minus;
  std::vector<Value> g(delta.size());
  for (std::size_t d = 0; d < delta.size(); ++d) g[d] = delta[d] > 0 ? Value(diff) : Value(-diff);
  return g;
}

struct DspsaTraceRow {
  int n = 0;
  double step = 0.0;
  double penalty = 0.0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double normalized_error = std::numeric_limits<double>::quiet_NaN();
  double max_lambda = 0.0;
  bool clamped = false;
};

struct DspsaState {
  std::vector<double> theta;   // continuous estimate, flattened [h * A_m + i - 1]
  std::vector<double> lambda;  // one multiplier per (h, i), i < A_m
  int iteration = 0;
  int num_channel = 0;
  int max_action = 0;
  int queue_size = 0;
  std::uint64_t simulations = 0;
  int clamp_iterations = 0;
  std::vector<DspsaTraceRow> trace;

  static DspsaState start(int num_channel, int max_action, int queue_size) {
    DspsaState s;
    s.num_channel = num_channel;
    s.max_action = max_action;
    s.queue_size = queue_size;
    s.theta.assign(static_cast<std::size_t>(num_channel * max_action), 0.0);
    s.lambda.assign(static_cast<std::size_t>(num_channel * std::max(max_action - 1, 0)), 0.0);
    return s;
  }

  static DspsaState start(const SystemModel& model) {
    return start(model.num_channel_states(), model.max_action(), model.queue_size());
  }

  /// Estimate sat on the box boundary in more than half the iterations.
  bool divergence_suspected() const {
    return iteration > 0 && 2 * clamp_iterations > iteration;
  }
};

/// Nearest-integer projection into {0..L_B+1}, then per-row sort.
inline ThresholdVector project_estimate(const DspsaState& state) {
  ThresholdVector out(state.num_channel, state.max_action, state.queue_size);
  for (std::size_t d = 0; d < state.theta.size(); ++d)
    out.values()[d] = std::clamp(static_cast<int>(std::lround(state.theta[d])), 0,
                                 state.queue_size + 1);
  out.repair();
  return out;
}

namespace detail {

inline double normalized_error(std::span<const double> theta, const ThresholdVector& reference) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t d = 0; d < theta.size(); ++d) {
    const double r = reference.values()[d];
    num += (theta[d] - r) * (theta[d] - r);
    den += r * r;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

/// Runs `count` further iterations of the constrained DSPSA loop against
/// `model`, continuing the iteration counter (and hence the step-size and
/// penalty schedules) stored in `state`.
inline void dspsa_advance(const SystemModel& model, const DspsaConfig& config, DspsaState& state,
                          int count, const ThresholdVector* reference = nullptr) {
  config.validate();
  if (state.num_channel != model.num_channel_states() || state.max_action != model.max_action() ||
      state.queue_size != model.queue_size())
    throw std::invalid_argument("dspsa: state does not match model dimensions");

  const TrajectorySimulator sim(model, config.sim);
  const int am = state.max_action;
  const double box = static_cast<double>(state.queue_size + 1);
  std::map<std::vector<int>, double> exact_cache;
  std::vector<double> grad(state.theta.size());

  for (int step = 0; step < count; ++step) {
    const int n = ++state.iteration;
    const double a_n = config.step_size(n);
    const double r_n = config.penalty(n);

    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(n), 0));
    const auto delta = draw_perturbation(state.theta.size(), rng);
    const std::uint64_t plus_seed = derive_seed(config.seed, static_cast<std::uint64_t>(n), 1);
    const std::uint64_t minus_seed =
        config.common_random_numbers ? plus_seed
                                     : derive_seed(config.seed, static_cast<std::uint64_t>(n), 2);
    bool first = true;
    auto noisy = [&](const ThresholdVector& phi) {
      ++state.simulations;
      const std::uint64_t seed = first ? plus_seed : minus_seed;
      first = false;
      return sim.j_hat(thresholds_to_policy_lenient(phi), seed);
    };
    const auto base = floor_point(state.theta, state.num_channel, am, state.queue_size);
    const auto g = dspsa_gradient(noisy, base, delta);
    std::copy(g.begin(), g.end(), grad.begin());

    double max_lambda = 0.0;
    for (int h = 0; h < state.num_channel; ++h)
      for (int i = 0; i + 1 < am; ++i) {
        const std::size_t d = static_cast<std::size_t>(h * am + i);
        const std::size_t c = static_cast<std::size_t>(h * (am - 1) + i);
        const double violation = state.theta[d] - state.theta[d + 1];
        const double multiplier = std::max(0.0, state.lambda[c] + r_n * violation);
        grad[d] += multiplier;
        grad[d + 1] -= multiplier;
        state.lambda[c] = multiplier;
        max_lambda = std::max(max_lambda, multiplier);
      }

    bool clamped = false;
    for (std::size_t d = 0; d < state.theta.size(); ++d) {
      const double next = state.theta[d] - a_n * grad[d];
      const double bounded = std::clamp(next, 0.0, box);
      if (bounded != next) clamped = true;
      state.theta[d] = bounded;
    }
    if (clamped) ++state.clamp_iterations;

    DspsaTraceRow row;
    row.n = n;
    row.step = a_n;
    row.penalty = r_n;
    row.max_lambda = max_lambda;
    row.clamped = clamped;
    if (config.trace_exact_objective) {
      const auto rounded = project_estimate(state);
      auto it = exact_cache.find(rounded.values());
      if (it == exact_cache.end())
        it = exact_cache.emplace(rounded.values(), exact_objective(model, rounded)).first;
      row.objective = it->second;
    }
    if (reference) row.normalized_error = detail::normalized_error(state.theta, *reference);
    state.trace.push_back(row);
  }
}

struct DspsaResult {
  ThresholdVector thresholds;
  DspsaState state;
};

inline DspsaResult dspsa_run(const SystemModel& model, const DspsaConfig& config,
                             const ThresholdVector* reference = nullptr) {
  DspsaState state = DspsaState::start(model);
  dspsa_advance(model, config, state, config.iterations, reference);
  return {project_estimate(state), std::move(state)};
}

/// First iteration after which the traced objective stays within
/// `band` (relative) of its final value.
inline int plateau_iteration(const std::vector<DspsaTraceRow>& trace, double band = 0.05) {
  if (trace.empty()) return 0;
  const double last = trace.back().objective;
  int n = trace.back().n;
  for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
    if (std::abs(it->objective - last) > band * std::abs(last)) break;
    n = it->n;
  }
  return n;
}

}  // namespace mqam
