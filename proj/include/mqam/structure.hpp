#pragma once

// Executable checks for the structural properties of the scheduling MDP
// (monotone / bounded-marginal policies, submodular and L-natural-convex Q,
// stochastic dominance of the channel) and the threshold encoding of
// queue-monotone policies.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mqam/solvers.hpp"

namespace mqam {

/// Default absolute tolerance for every structural inequality.
inline constexpr double kStructureTolerance = 1e-9;

struct Cell {
  int b = 0;
  int h = 0;  // 0-based
  bool operator==(const Cell&) const = default;
};

struct CellCheck {
  bool ok = true;
  std::vector<Cell> witnesses;
};

/// theta(b+1, h) >= theta(b, h); a witness (b, h) marks a drop after b.
inline CellCheck check_monotone_b(const Policy& policy) {
  CellCheck out;
  for (int h = 0; h < policy.num_channel(); ++h)
    for (int b = 0; b + 1 < policy.num_queue(); ++b)
      if (policy(b + 1, h) < policy(b, h)) out.witnesses.push_back({b, h});
  out.ok = out.witnesses.empty();
  return out;
}

/// theta(b+1, h) <= theta(b, h) + 1.
inline CellCheck check_bounded_marginal(const Policy& policy) {
  CellCheck out;
  for (int h = 0; h < policy.num_channel(); ++h)
    for (int b = 0; b + 1 < policy.num_queue(); ++b)
      if (policy(b + 1, h) > policy(b, h) + 1) out.witnesses.push_back({b, h});
  out.ok = out.witnesses.empty();
  return out;
}

/// theta(b, h+1) >= theta(b, h); a witness (b, h) marks a drop after h.
inline CellCheck check_monotone_h(const Policy& policy) {
  CellCheck out;
  for (int b = 0; b < policy.num_queue(); ++b)
    for (int h = 0; h + 1 < policy.num_channel(); ++h)
      if (policy(b, h + 1) < policy(b, h)) out.witnesses.push_back({b, h});
  out.ok = out.witnesses.empty();
  return out;
}

/// Sufficient weight-factor conditions for a policy monotone in both b and h.
struct Corollary1Report {
  double weight = 0.0;
  /// min over adjacent channel pairs of the closed-form weight bound
  /// (+inf with a single channel state).
  double bound = std::numeric_limits<double>::infinity();
  int bound_state = -1;
  /// min over (h, a) of the c_tr cross difference minus w.
  double slack = std::numeric_limits<double>::infinity();
  int slack_state = -1;
  int slack_action = -1;
  bool bound_ok = true;
  bool slack_ok = true;

  double margin() const { return bound - weight; }
};

inline Corollary1Report check_corollary1(const SystemConfig& config) {
  Corollary1Report out;
  out.weight = config.weight;
  const int k = config.channel.size();
  const double scale = -2.0 * std::log(5.0 * config.ber_constraint) / 1.5;
  for (int h = 0; h + 1 < k; ++h) {
    const double rhs = scale * (1.0 / transmission_snr(config.channel, h) -
                                1.0 / transmission_snr(config.channel, h + 1));
    if (rhs < out.bound) {
      out.bound = rhs;
      out.bound_state = h;
    }
    for (int a = 0; a < config.max_action; ++a) {
      const double cross =
          transmission_cost(h + 1, a, config) + transmission_cost(h, a + 1, config) -
          transmission_cost(h, a, config) - transmission_cost(h + 1, a + 1, config);
      const double slack = cross - config.weight;
      if (slack < out.slack) {
        out.slack = slack;
        out.slack_state = h;
        out.slack_action = a;
      }
    }
  }
  out.bound_ok = config.weight <= out.bound;
  out.slack_ok = out.slack >= 0.0;
  return out;
}

struct DominanceWitness {
  int h = 0;     // rows h and h+1 are compared
  int next = 0;  // CDF evaluation point
};

struct DominanceCheck {
  bool ok = true;
  std::vector<DominanceWitness> witnesses;
};

/// First-order stochastic dominance of row h+1 over row h for every h, via
/// the CDF criterion: F_{h+1}(j) <= F_h(j) for all j.
inline DominanceCheck check_first_order_dominance(std::span<const double> matrix, int k,
                                                  double tol = kStructureTolerance) {
  if (k < 1 || matrix.size() != static_cast<std::size_t>(k * k))
    throw std::invalid_argument("dominance: matrix must be KxK");
  for (int h = 0; h < k; ++h) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      const double p = matrix[static_cast<std::size_t>(h * k + j)];
      if (!(p >= 0.0)) throw std::invalid_argument("dominance: negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("dominance: matrix is not row-stochastic");
  }
  DominanceCheck out;
  for (int h = 0; h + 1 < k; ++h) {
    double lower = 0.0;
    double upper = 0.0;
    for (int j = 0; j + 1 < k; ++j) {
      lower += matrix[static_cast<std::size_t>(h * k + j)];
      upper += matrix[static_cast<std::size_t>((h + 1) * k + j)];
      if (upper > lower + tol) out.witnesses.push_back({h, j});
    }
  }
  out.ok = out.witnesses.empty();
  return out;
}

inline DominanceCheck check_first_order_dominance(const FsmcChannel& channel,
                                                  double tol = kStructureTolerance) {
  return check_first_order_dominance(channel.transition_data(), channel.size(), tol);
}

/// Full Q table, laid out as [(b * K + h) * |A| + a].
class QTable {
 public:
  QTable(const SystemModel& model, const ValueFunction& v)
      : nb_(model.num_queue_states()),
        nh_(model.num_channel_states()),
        na_(model.num_actions()),
        q_(static_cast<std::size_t>(nb_ * nh_ * na_)) {
    for (int b = 0; b < nb_; ++b)
      for (int h = 0; h < nh_; ++h)
        for (int a = 0; a < na_; ++a) q_[index(b, h, a)] = q_value(model, v, b, h, a);
  }
  double operator()(int b, int h, int a) const { return q_[index(b, h, a)]; }
  int num_queue() const { return nb_; }
  int num_channel() const { return nh_; }
  int num_actions() const { return na_; }

 private:
  std::size_t index(int b, int h, int a) const {
    return static_cast<std::size_t>((b * nh_ + h) * na_ + a);
  }
  int nb_, nh_, na_;
  std::vector<double> q_;
};

/// Index tuple at which an inequality failed. `family` names the pair of
/// coordinates (or the L-natural family) being tested.
struct QWitness {
  int b = 0;
  int h = 0;
  int a = 0;
  std::string family;
};

struct QCheck {
  bool ok = true;
  std::vector<QWitness> witnesses;
};

/// Submodularity of Q in (b, h, a): f(x+e_i) + f(x+e_j) >= f(x) + f(x+e_i+e_j)
/// for each coordinate pair.
inline QCheck check_q_submodular(const QTable& q, double tol = kStructureTolerance) {
  QCheck out;
  const int nb = q.num_queue(), nh = q.num_channel(), na = q.num_actions();
  for (int b = 0; b < nb; ++b)
    for (int h = 0; h < nh; ++h)
      for (int a = 0; a < na; ++a) {
        if (b + 1 < nb && h + 1 < nh &&
            q(b + 1, h, a) + q(b, h + 1, a) < q(b, h, a) + q(b + 1, h + 1, a) - tol)
          out.witnesses.push_back({b, h, a, "b,h"});
        if (b + 1 < nb && a + 1 < na &&
            q(b + 1, h, a) + q(b, h, a + 1) < q(b, h, a) + q(b + 1, h, a + 1) - tol)
          out.witnesses.push_back({b, h, a, "b,a"});
        if (h + 1 < nh && a + 1 < na &&
            q(b, h + 1, a) + q(b, h, a + 1) < q(b, h, a) + q(b, h + 1, a + 1) - tol)
          out.witnesses.push_back({b, h, a, "h,a"});
      }
  out.ok = out.witnesses.empty();
  return out;
}

inline QCheck check_q_submodular(const SystemModel& model, const ValueFunction& v,
                                 double tol = kStructureTolerance) {
  return check_q_submodular(QTable(model, v), tol);
}

/// L-natural convexity of Q in (b, a) for each fixed h: psi(b, a, z) =
/// Q(b - z, a - z) must be submodular in (b, a, z). The three coordinate
/// pairs give the three families checked here.
inline QCheck check_q_lnatural(const QTable& q, double tol = kStructureTolerance) {
  QCheck out;
  const int nb = q.num_queue(), nh = q.num_channel(), na = q.num_actions();
  for (int h = 0; h < nh; ++h)
    for (int b = 0; b < nb; ++b)
      for (int a = 0; a < na; ++a) {
        if (b + 1 < nb && a + 1 < na &&
            q(b + 1, h, a) + q(b, h, a + 1) < q(b, h, a) + q(b + 1, h, a + 1) - tol)
          out.witnesses.push_back({b, h, a, "b,a"});
        if (b >= 1 && b + 1 < nb && a + 1 < na &&
            q(b + 1, h, a + 1) + q(b - 1, h, a) < q(b, h, a + 1) + q(b, h, a) - tol)
          out.witnesses.push_back({b, h, a, "b,z"});
        if (b + 1 < nb && a + 2 < na &&
            q(b + 1, h, a + 2) + q(b, h, a) < q(b + 1, h, a + 1) + q(b, h, a + 1) - tol)
          out.witnesses.push_back({b, h, a, "a,z"});
      }
  out.ok = out.witnesses.empty();
  return out;
}

inline QCheck check_q_lnatural(const SystemModel& model, const ValueFunction& v,
                               double tol = kStructureTolerance) {
  return check_q_lnatural(QTable(model, v), tol);
}

/// Queue thresholds of a b-monotone policy: at(h, i) is the smallest queue
/// state at which channel state h uses an action >= i, or L_B + 1 if none.
class ThresholdVector {
 public:
  ThresholdVector() = default;
  ThresholdVector(int num_channel, int max_action, int queue_size, int fill = 0)
      : nh_(num_channel),
        am_(max_action),
        queue_size_(queue_size),
        values_(static_cast<std::size_t>(num_channel * max_action), fill) {}

  int num_channel() const { return nh_; }
  int max_action() const { return am_; }
  int queue_size() const { return queue_size_; }
  int never() const { return queue_size_ + 1; }
  std::size_t dimension() const { return values_.size(); }

  /// `level` runs 1..A_m.
  int& at(int h, int level) { return values_[flat(h, level)]; }
  int at(int h, int level) const { return values_[flat(h, level)]; }

  std::vector<int>& values() { return values_; }
  const std::vector<int>& values() const { return values_; }

  bool feasible() const {
    for (int h = 0; h < nh_; ++h)
      for (int i = 1; i < am_; ++i)
        if (at(h, i) > at(h, i + 1)) return false;
    return true;
  }

  /// Sorts every row ascending: the smallest change that restores feasibility.
  void repair() {
    for (int h = 0; h < nh_; ++h)
      std::sort(values_.begin() + h * am_, values_.begin() + (h + 1) * am_);
  }

  bool operator==(const ThresholdVector&) const = default;

 private:
  std::size_t flat(int h, int level) const {
    return static_cast<std::size_t>(h * am_ + level - 1);
  }
  int nh_ = 0;
  int am_ = 0;
  int queue_size_ = 0;
  std::vector<int> values_;
};

inline ThresholdVector policy_to_thresholds(const Policy& policy, int max_action) {
  if (!check_monotone_b(policy).ok)
    throw std::invalid_argument("policy_to_thresholds: policy is not nondecreasing in b");
  const int queue_size = policy.num_queue() - 1;
  ThresholdVector out(policy.num_channel(), max_action, queue_size, queue_size + 1);
  for (int h = 0; h < policy.num_channel(); ++h)
    for (int i = 1; i <= max_action; ++i)
      for (int b = 0; b <= queue_size; ++b)
        if (policy(b, h) >= i) {
          out.at(h, i) = b;
          break;
        }
  return out;
}

/// theta(b, h) = max{i : b >= phi(h, i)}, or 0. Evaluated verbatim, so it
/// is total even for unsorted rows or entries outside {0..L_B+1}.
inline Policy thresholds_to_policy_lenient(const ThresholdVector& phi) {
  Policy policy(phi.queue_size() + 1, phi.num_channel(), 0);
  for (int h = 0; h < phi.num_channel(); ++h)
    for (int b = 0; b <= phi.queue_size(); ++b) {
      int action = 0;
      for (int i = 1; i <= phi.max_action(); ++i)
        if (b >= phi.at(h, i)) action = i;
      policy(b, h) = action;
    }
  return policy;
}

inline Policy thresholds_to_policy(const ThresholdVector& phi) {
  if (!phi.feasible())
    throw std::invalid_argument("thresholds_to_policy: threshold rows must be nondecreasing");
  return thresholds_to_policy_lenient(phi);
}

struct StructureReport {
  CellCheck monotone_b;
  CellCheck bounded_marginal;
  CellCheck monotone_h;
  Corollary1Report corollary1;
  DominanceCheck dominance;
  std::optional<QCheck> q_submodular;
  std::optional<QCheck> q_lnatural;

  /// The queue-monotonicity pair holds for every instance; the rest are
  /// conditional.
  bool unconditional_ok() const { return monotone_b.ok && bounded_marginal.ok; }
};

inline StructureReport build_structure_report(const SystemModel& model, const Policy& policy,
                                              const ValueFunction* values = nullptr) {
  StructureReport r;
  r.monotone_b = check_monotone_b(policy);
  r.bounded_marginal = check_bounded_marginal(policy);
  r.monotone_h = check_monotone_h(policy);
  r.corollary1 = check_corollary1(model.config());
  r.dominance = check_first_order_dominance(model.channel());
  if (values) {
    const QTable q(model, *values);
    r.q_submodular = check_q_submodular(q);
    r.q_lnatural = check_q_lnatural(q);
  }
  return r;
}

}  // namespace mqam
