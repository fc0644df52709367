#pragma once

// Discounted-cost solvers: value iteration and the two monotone policy
// iteration variants, plus exact evaluation of a fixed policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mqam/mdp.hpp"

namespace mqam {

/// Dense (b, h) table; rows are queue states, columns channel states.
template <typename T>
class StateTable {
 public:
  StateTable() = default;
  StateTable(int num_queue, int num_channel, T fill = T{})
      : nb_(num_queue),
        nh_(num_channel),
        data_(static_cast<std::size_t>(num_queue * num_channel), fill) {}

  explicit StateTable(const SystemModel& model, T fill = T{})
      : StateTable(model.num_queue_states(), model.num_channel_states(), fill) {}

  int num_queue() const { return nb_; }
  int num_channel() const { return nh_; }

  T& operator()(int b, int h) { return data_[static_cast<std::size_t>(b * nh_ + h)]; }
  const T& operator()(int b, int h) const {
    return data_[static_cast<std::size_t>(b * nh_ + h)];
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool operator==(const StateTable&) const = default;

 private:
  int nb_ = 0;
  int nh_ = 0;
  std::vector<T> data_;
};

using ValueFunction = StateTable<double>;
using Policy = StateTable<int>;

enum class Algorithm { kValueIteration, kMpiSubmodular, kMpiLNatural };

inline std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::kValueIteration: return "dp";
    case Algorithm::kMpiSubmodular: return "mpi_sub";
    case Algorithm::kMpiLNatural: return "mpi_lnat";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "dp") return Algorithm::kValueIteration;
  if (name == "mpi_sub") return Algorithm::kMpiSubmodular;
  if (name == "mpi_lnat") return Algorithm::kMpiLNatural;
  throw std::invalid_argument("unknown algorithm '" + std::string(name) +
                              "' (expected dp, mpi_sub or mpi_lnat)");
}

struct SolveReport {
  Algorithm algorithm = Algorithm::kValueIteration;
  int iterations = 0;
  std::uint64_t q_evals_total = 0;
  std::vector<std::uint64_t> q_evals_per_iteration;
  std::vector<double> sup_norm_trace;
  double epsilon = 1e-4;
  bool converged = false;

  double mean_q_evals_per_iteration() const {
    return iterations == 0 ? 0.0
                           : static_cast<double>(q_evals_total) / iterations;
  }
};

struct SolveResult {
  ValueFunction values;
  Policy policy;
  SolveReport report;
};

/// Thrown when the iteration cap is hit before the sup-norm gap reaches
/// epsilon. Carries the partial report.
class NonConvergence : public std::runtime_error {
 public:
  explicit NonConvergence(SolveReport report)
      : std::runtime_error("solver did not converge within " +
                           std::to_string(report.iterations) + " iterations"),
        report_(std::move(report)) {}
  const SolveReport& report() const { return report_; }

 private:
  SolveReport report_;
};

struct SolveOptions {
  double epsilon = 1e-4;
  std::optional<ValueFunction> initial;
  /// Defaults to ceil(10 log(eps (1 - beta)) / log beta), at least 2.
  std::optional<int> max_iterations;
  /// Called with (n, V^(n)) after every Bellman update.
  std::function<void(int, const ValueFunction&)> on_iterate;
};

inline int default_iteration_cap(double epsilon, double discount) {
  if (discount <= 0.0) return 2;
  const double n = 10.0 * std::log(epsilon * (1.0 - discount)) / std::log(discount);
  if (!(n > 2.0)) return 2;
  return static_cast<int>(std::ceil(n));
}

/// Q(x, a) = c(x, a) + beta * sum_x' P(x'|x, a) V(x'), by the explicit double
/// sum over next states.
inline double q_value(const SystemModel& model, const ValueFunction& v, int b, int h,
                      int a) {
  const auto queue = model.queue_row(b, a);
  const auto chan = model.channel().row(h);
  double expect = 0.0;
  for (int nb = 0; nb < model.num_queue_states(); ++nb) {
    const double pq = queue[static_cast<std::size_t>(nb)];
    if (pq == 0.0) continue;
    for (int nh = 0; nh < model.num_channel_states(); ++nh)
      expect += pq * chan[static_cast<std::size_t>(nh)] * v(nb, nh);
  }
  return model.cost(b, h, a) + model.discount() * expect;
}

inline double q_value(const SystemModel& model, const ValueFunction& v, int b, int h, int a,
                      std::uint64_t& evals) {
  ++evals;
  return q_value(model, v, b, h, a);
}

namespace detail {

/// Channel-averaged continuation W(b', h) = sum_h' P(h'|h) V(b', h'). Q then
/// needs only a sum over b'.
class QEvaluator {
 public:
  QEvaluator(const SystemModel& model, const ValueFunction& v)
      : model_(model), cont_(model) {
    const int nb = model.num_queue_states();
    const int nh = model.num_channel_states();
    for (int b = 0; b < nb; ++b)
      for (int h = 0; h < nh; ++h) {
        const auto chan = model.channel().row(h);
        double acc = 0.0;
        for (int nh2 = 0; nh2 < nh; ++nh2) acc += chan[static_cast<std::size_t>(nh2)] * v(b, nh2);
        cont_(b, h) = acc;
      }
  }

  double operator()(int b, int h, int a) {
    ++evals;
    const auto queue = model_.queue_row(b, a);
    double expect = 0.0;
    for (int nb = 0; nb < model_.num_queue_states(); ++nb)
      expect += queue[static_cast<std::size_t>(nb)] * cont_(nb, h);
    return model_.cost(b, h, a) + model_.discount() * expect;
  }

  std::uint64_t evals = 0;

 private:
  const SystemModel& model_;
  ValueFunction cont_;
};

struct ArgMin {
  int action = 0;
  double value = std::numeric_limits<double>::infinity();
};

/// Smallest action attaining the minimum over [lo, hi].
inline ArgMin argmin_range(QEvaluator& q, int b, int h, int lo, int hi) {
  ArgMin best;
  best.action = lo;
  for (int a = lo; a <= hi; ++a) {
    const double value = q(b, h, a);
    if (value < best.value) {
      best.value = value;
      best.action = a;
    }
  }
  return best;
}

}  // namespace detail

/// Greedy policy with respect to V over the full action set, ties broken
/// toward the smallest action.
inline Policy greedy_policy(const SystemModel& model, const ValueFunction& v) {
  detail::QEvaluator q(model, v);
  Policy policy(model);
  for (int h = 0; h < model.num_channel_states(); ++h)
    for (int b = 0; b < model.num_queue_states(); ++b)
      policy(b, h) = detail::argmin_range(q, b, h, 0, model.max_action()).action;
  return policy;
}

/// One Bellman sweep restricted by `algorithm`'s action-set rule. Channel
/// states are the outer loop and queue states ascend in the inner loop, so
/// theta(b-1, h) from the current sweep is available when b is visited.
inline std::uint64_t bellman_sweep(const SystemModel& model, Algorithm algorithm,
                                   const ValueFunction& v, ValueFunction& next) {
  detail::QEvaluator q(model, v);
  const int top = model.max_action();
  for (int h = 0; h < model.num_channel_states(); ++h) {
    int prev = -1;
    for (int b = 0; b < model.num_queue_states(); ++b) {
      int lo = 0;
      int hi = top;
      if (b > 0) {
        switch (algorithm) {
          case Algorithm::kValueIteration: break;
          case Algorithm::kMpiSubmodular: lo = prev; break;
          case Algorithm::kMpiLNatural:
            lo = prev;
            hi = std::min(prev + 1, top);
            break;
        }
      }
      const auto best = detail::argmin_range(q, b, h, lo, hi);
      next(b, h) = best.value;
      prev = best.action;
    }
  }
  return q.evals;
}

inline SolveResult solve(const SystemModel& model, Algorithm algorithm,
                         const SolveOptions& options = {}) {
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("solve: epsilon must be > 0");
  ValueFunction v = options.initial.value_or(ValueFunction(model, 0.0));
  if (v.num_queue() != model.num_queue_states() ||
      v.num_channel() != model.num_channel_states())
    throw std::invalid_argument("solve: initial value function has wrong shape");

  SolveReport report;
  report.algorithm = algorithm;
  report.epsilon = options.epsilon;
  const int cap =
      options.max_iterations.value_or(default_iteration_cap(options.epsilon, model.discount()));

  ValueFunction next(model);
  while (report.iterations < cap) {
    const std::uint64_t evals = bellman_sweep(model, algorithm, v, next);
    double gap = 0.0;
    for (std::size_t i = 0; i < v.data().size(); ++i)
      gap = std::max(gap, std::abs(next.data()[i] - v.data()[i]));
    std::swap(v, next);
    ++report.iterations;
    report.q_evals_total += evals;
    report.q_evals_per_iteration.push_back(evals);
    report.sup_norm_trace.push_back(gap);
    if (options.on_iterate) options.on_iterate(report.iterations, v);
    if (gap <= options.epsilon) {
      report.converged = true;
      break;
    }
  }
  if (!report.converged) throw NonConvergence(std::move(report));
  Policy policy = greedy_policy(model, v);
  return {std::move(v), std::move(policy), std::move(report)};
}

inline SolveResult value_iteration(const SystemModel& model, const SolveOptions& options = {}) {
  return solve(model, Algorithm::kValueIteration, options);
}

inline SolveResult mpi_submodular(const SystemModel& model, const SolveOptions& options = {}) {
  return solve(model, Algorithm::kMpiSubmodular, options);
}

inline SolveResult mpi_lnatural(const SystemModel& model, const SolveOptions& options = {}) {
  return solve(model, Algorithm::kMpiLNatural, options);
}

/// V_theta from the linear system (I - beta P_theta) V = c_theta.
inline ValueFunction evaluate_policy(const SystemModel& model, const Policy& policy) {
  const int nb = model.num_queue_states();
  const int nh = model.num_channel_states();
  if (policy.num_queue() != nb || policy.num_channel() != nh)
    throw std::invalid_argument("evaluate_policy: policy has wrong shape");
  const Eigen::Index n = nb * nh;
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  const double beta = model.discount();
  for (int b = 0; b < nb; ++b)
    for (int h = 0; h < nh; ++h) {
      const int a = policy(b, h);
      if (a < 0 || a > model.max_action())
        throw std::invalid_argument("evaluate_policy: action out of range");
      const Eigen::Index row = b * nh + h;
      rhs(row) = model.cost(b, h, a);
      const auto queue = model.queue_row(b, a);
      const auto chan = model.channel().row(h);
      for (int b2 = 0; b2 < nb; ++b2) {
        const double pq = queue[static_cast<std::size_t>(b2)];
        if (pq == 0.0) continue;
        for (int h2 = 0; h2 < nh; ++h2)
          m(row, b2 * nh + h2) -= beta * pq * chan[static_cast<std::size_t>(h2)];
      }
    }
  const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  ValueFunction v(model);
  for (Eigen::Index i = 0; i < n; ++i) v.data()[static_cast<std::size_t>(i)] = x(i);
  return v;
}

inline double total_value(const ValueFunction& v) {
  double sum = 0.0;
  for (double x : v.data()) sum += x;
  return sum;
}

}  // namespace mqam
