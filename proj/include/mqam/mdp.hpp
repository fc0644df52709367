#pragma once

// Controlled queue/channel Markov chain: states, arrivals, transition kernel
// and immediate costs of the adaptive m-QAM scheduler.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mqam/channel.hpp"

namespace mqam {

/// How the Poisson tail beyond the buffer size is handled.
enum class Truncation { kRenormalize, kLumpTail };

/// I.i.d. per-epoch packet arrivals on {0, ..., L_B}.
struct ArrivalDist {
  std::vector<double> pmf;

  void validate() const {
    if (pmf.empty()) throw std::invalid_argument("arrivals: empty pmf");
    double sum = 0.0;
    for (double p : pmf) {
      if (!(p >= 0.0) || !std::isfinite(p))
        throw std::invalid_argument("arrivals: negative or non-finite mass");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("arrivals: pmf does not sum to 1");
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t l = 0; l < pmf.size(); ++l) m += static_cast<double>(l) * pmf[l];
    return m;
  }
};

inline ArrivalDist make_poisson_arrivals(double rate, int queue_size,
                                         Truncation mode = Truncation::kRenormalize) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("arrivals: Poisson rate must be >= 0");
  if (queue_size < 0) throw std::invalid_argument("arrivals: negative queue size");
  std::vector<double> pmf(static_cast<std::size_t>(queue_size) + 1, 0.0);
  if (rate == 0.0) {
    pmf[0] = 1.0;
    return {pmf};
  }
  double term = std::exp(-rate);
  double sum = 0.0;
  for (int l = 0; l <= queue_size; ++l) {
    if (l > 0) term *= rate / static_cast<double>(l);
    pmf[static_cast<std::size_t>(l)] = term;
    sum += term;
  }
  if (mode == Truncation::kRenormalize) {
    for (double& p : pmf) p /= sum;
  } else {
    pmf.back() += std::max(0.0, 1.0 - sum);
  }
  return {pmf};
}

struct SystemConfig {
  int queue_size = 15;  // L_B
  int max_action = 5;   // A_m
  double weight = 1.0;
  double ber_constraint = 1e-3;
  double discount = 0.95;
  ArrivalDist arrivals;
  FsmcChannel channel;
  std::optional<int> packet_bits;

  void validate() const {
    if (queue_size < 0) throw std::invalid_argument("system: queue_size must be >= 0");
    if (max_action < 0 || max_action > queue_size)
      throw std::invalid_argument("system: max_action must lie in [0, queue_size]");
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw std::invalid_argument("system: weight must be > 0");
    if (!(ber_constraint > 0.0 && ber_constraint <= 0.2))
      throw std::invalid_argument("system: ber_constraint must lie in (0, 0.2]");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("system: discount must lie in [0, 1)");
    arrivals.validate();
    if (arrivals.pmf.size() != static_cast<std::size_t>(queue_size) + 1)
      throw std::invalid_argument("system: arrival pmf must cover {0..queue_size}");
    if (packet_bits && *packet_bits <= 0)
      throw std::invalid_argument("system: packet_bits must be > 0");
  }
};

struct SystemState {
  int b = 0;  // queue occupancy
  int h = 0;  // channel state, 0-based
};

/// Lindley recursion with a finite buffer.
constexpr int queue_next(int b, int a, int f, int queue_size) {
  return std::min(std::max(b - a, 0) + f, queue_size);
}

/// P(b' | b, a) for b' = 0..L_B.
inline std::vector<double> queue_transition_row(int b, int a, const ArrivalDist& arrivals,
                                                int queue_size) {
  const int y = std::max(b - a, 0);
  std::vector<double> row(static_cast<std::size_t>(queue_size) + 1, 0.0);
  for (int next = y; next < queue_size; ++next)
    row[static_cast<std::size_t>(next)] = arrivals.pmf[static_cast<std::size_t>(next - y)];
  double tail = 0.0;
  for (int l = queue_size - y; l <= queue_size; ++l)
    tail += arrivals.pmf[static_cast<std::size_t>(l)];
  row[static_cast<std::size_t>(queue_size)] = tail;
  return row;
}

/// Expected number of packets dropped when `y` packets remain after service.
inline double expected_overflow(int y, const ArrivalDist& arrivals, int queue_size) {
  double e = 0.0;
  for (std::size_t f = 0; f < arrivals.pmf.size(); ++f) {
    const int excess = y + static_cast<int>(f) - queue_size;
    if (excess > 0) e += static_cast<double>(excess) * arrivals.pmf[f];
  }
  return e;
}

/// SNR at which the transmit-power term is evaluated for channel state `h`.
/// This is the region's lower boundary, except when that boundary is not
/// positive (the lowest equiprobable region starts at 0); then the Rayleigh
/// conditional median of [Gamma_1, Gamma_2) is used instead.
inline double transmission_snr(const FsmcChannel& channel, int h) {
  const auto bounds = channel.boundaries();
  const double lower = bounds[static_cast<std::size_t>(h)];
  if (lower > 0.0) return lower;
  const double mean = channel.average_snr();
  const double f_lo = -std::expm1(-std::max(lower, 0.0) / mean);
  const double f_hi = (h + 1 < channel.size())
                          ? -std::expm1(-bounds[static_cast<std::size_t>(h + 1)] / mean)
                          : 1.0;
  return rayleigh_snr_quantile(mean, 0.5 * (f_lo + f_hi));
}

/// Minimum power for `a` bits/symbol at the BER target in channel state `h`.
inline double transmission_cost(int h, int a, const SystemConfig& config) {
  const double snr = transmission_snr(config.channel, h);
  if (!(snr > 0.0))
    throw std::domain_error("transmission cost: non-positive SNR for channel state " +
                            std::to_string(h + 1));
  return -std::log(5.0 * config.ber_constraint) * (std::exp2(a) - 1.0) / (1.5 * snr);
}

inline double queue_cost(int b, int a, const SystemConfig& config) {
  return config.weight *
         expected_overflow(std::max(b - a, 0), config.arrivals, config.queue_size);
}

inline double immediate_cost(int b, int h, int a, const SystemConfig& config) {
  return queue_cost(b, a, config) + transmission_cost(h, a, config);
}

/// Immutable model with every cost and transition table precomputed.
class SystemModel {
 public:
  explicit SystemModel(SystemConfig config) : config_(std::move(config)) {
    config_.validate();
    nb_ = config_.queue_size + 1;
    nh_ = config_.channel.size();
    na_ = config_.max_action + 1;

    overflow_.resize(static_cast<std::size_t>(nb_));
    queue_rows_.resize(static_cast<std::size_t>(nb_ * nb_));
    for (int y = 0; y < nb_; ++y) {
      overflow_[static_cast<std::size_t>(y)] =
          expected_overflow(y, config_.arrivals, config_.queue_size);
      const auto row = queue_transition_row(y, 0, config_.arrivals, config_.queue_size);
      std::copy(row.begin(), row.end(),
                queue_rows_.begin() + static_cast<std::ptrdiff_t>(y * nb_));
    }

    snr_.resize(static_cast<std::size_t>(nh_));
    for (int h = 0; h < nh_; ++h) snr_[static_cast<std::size_t>(h)] = mqam::transmission_snr(config_.channel, h);

    cost_tr_.resize(static_cast<std::size_t>(nh_ * na_));
    for (int h = 0; h < nh_; ++h)
      for (int a = 0; a < na_; ++a)
        cost_tr_[static_cast<std::size_t>(h * na_ + a)] = mqam::transmission_cost(h, a, config_);

    cost_.resize(static_cast<std::size_t>(nb_ * nh_ * na_));
    for (int b = 0; b < nb_; ++b)
      for (int h = 0; h < nh_; ++h)
        for (int a = 0; a < na_; ++a)
          cost_[index(b, h, a)] = queue_cost_table(b, a) + transmission_cost_table(h, a);

    arrival_cdf_.resize(config_.arrivals.pmf.size());
    double acc = 0.0;
    for (std::size_t l = 0; l < arrival_cdf_.size(); ++l) {
      acc += config_.arrivals.pmf[l];
      arrival_cdf_[l] = acc;
    }
  }

  const SystemConfig& config() const { return config_; }
  const FsmcChannel& channel() const { return config_.channel; }
  int num_queue_states() const { return nb_; }
  int num_channel_states() const { return nh_; }
  int num_actions() const { return na_; }
  int num_states() const { return nb_ * nh_; }
  int queue_size() const { return config_.queue_size; }
  int max_action() const { return config_.max_action; }
  double discount() const { return config_.discount; }

  double cost(int b, int h, int a) const { return cost_[index(b, h, a)]; }
  double queue_cost_table(int b, int a) const {
    return config_.weight * overflow_[static_cast<std::size_t>(std::max(b - a, 0))];
  }
  double transmission_cost_table(int h, int a) const {
    return cost_tr_[static_cast<std::size_t>(h * na_ + a)];
  }
  double transmission_snr(int h) const { return snr_[static_cast<std::size_t>(h)]; }
  double max_cost() const { return *std::max_element(cost_.begin(), cost_.end()); }

  /// P(b' | b, a) as a span over b'.
  std::span<const double> queue_row(int b, int a) const {
    const int y = std::max(b - a, 0);
    return {queue_rows_.data() + static_cast<std::size_t>(y * nb_),
            static_cast<std::size_t>(nb_)};
  }
  std::span<const double> arrival_cdf() const { return arrival_cdf_; }

  /// Product kernel P(b'|b,a) P(h'|h), laid out as [b' * K + h'].
  std::vector<double> full_transition(SystemState x, int a) const {
    std::vector<double> out(static_cast<std::size_t>(nb_ * nh_), 0.0);
    const auto q = queue_row(x.b, a);
    const auto c = config_.channel.row(x.h);
    for (int nb = 0; nb < nb_; ++nb)
      for (int nh = 0; nh < nh_; ++nh)
        out[static_cast<std::size_t>(nb * nh_ + nh)] =
            q[static_cast<std::size_t>(nb)] * c[static_cast<std::size_t>(nh)];
    return out;
  }

  /// FNV-1a over the bit patterns of the full cost table.
  std::uint64_t cost_checksum() const {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (double v : cost_) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 8; ++i) {
        hash ^= (bits >> (8 * i)) & 0xffU;
        hash *= 0x100000001b3ULL;
      }
    }
    return hash;
  }

 private:
  std::size_t index(int b, int h, int a) const {
    return static_cast<std::size_t>((b * nh_ + h) * na_ + a);
  }

  SystemConfig config_;
  int nb_ = 0;
  int nh_ = 0;
  int na_ = 0;
  std::vector<double> overflow_;
  std::vector<double> queue_rows_;
  std::vector<double> snr_;
  std::vector<double> cost_tr_;
  std::vector<double> cost_;
  std::vector<double> arrival_cdf_;
};

}  // namespace mqam
