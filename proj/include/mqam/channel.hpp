#pragma once

// Finite-state Markov channel (FSMC) models of slow, flat Rayleigh fading.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mqam/random.hpp"

namespace mqam {

/// Physical description of the fading channel. SNR is linear scale.
struct ChannelParams {
  double average_snr = 1.0;
  double doppler_hz = 10.0;
  double epoch_seconds = 1e-3;
  int num_states = 8;

  double normalized_doppler() const { return doppler_hz * epoch_seconds; }

  void validate() const {
    if (num_states < 1)
      throw std::invalid_argument("channel: num_states must be >= 1");
    if (!(average_snr > 0.0) || !std::isfinite(average_snr))
      throw std::invalid_argument("channel: average_snr must be > 0");
    if (!(doppler_hz >= 0.0) || !std::isfinite(doppler_hz))
      throw std::invalid_argument("channel: doppler_hz must be >= 0");
    if (!(epoch_seconds > 0.0) || !std::isfinite(epoch_seconds))
      throw std::invalid_argument("channel: epoch_seconds must be > 0");
  }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Emitted when a state's neighbour probabilities had to be rescaled to
/// keep the diagonal nonnegative.
struct ClampEvent {
  int state = 0;
  double up_before = 0.0;
  double down_before = 0.0;
};

/// Non-fatal findings collected while building a channel.
struct ChannelDiagnostics {
  std::vector<ClampEvent> clamps;
  /// States whose raw neighbour probability exceeded 0.5 before clamping.
  std::vector<int> large_offdiagonal_states;
  bool fast_fading_warning = false;  // normalized Doppler above 0.01
  bool transition_overridden = false;
};

/// Immutable FSMC: SNR region boundaries, row-stochastic transition matrix
/// and stationary distribution. States are indexed 0..K-1 in code; exported
/// files label them 1..K.
class FsmcChannel {
 public:
  static constexpr double kRowTolerance = 1e-12;

  /// `average_snr` is the mean SNR of the underlying Rayleigh process; it is
  /// needed to pick an in-region SNR for a state whose lower boundary is 0.
  FsmcChannel(std::vector<double> boundaries, std::vector<double> transition,
              double average_snr, std::vector<double> stationary = {},
              ChannelDiagnostics diagnostics = {})
      : average_snr_(average_snr),
        boundaries_(std::move(boundaries)),
        transition_(std::move(transition)),
        stationary_(std::move(stationary)),
        diagnostics_(std::move(diagnostics)) {
    const std::size_t k = boundaries_.size();
    if (k == 0) throw std::invalid_argument("channel: no states");
    if (!(average_snr_ > 0.0))
      throw std::invalid_argument("channel: average_snr must be > 0");
    for (std::size_t i = 1; i < k; ++i)
      if (!(boundaries_[i] > boundaries_[i - 1]))
        throw std::invalid_argument(
            "channel: SNR boundaries must be strictly increasing");
    if (transition_.size() != k * k)
      throw std::invalid_argument("channel: transition matrix must be KxK");
    for (std::size_t h = 0; h < k; ++h) {
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        const double p = transition_[h * k + j];
        if (!(p >= 0.0 && p <= 1.0))
          throw std::invalid_argument("channel: transition entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowTolerance)
        throw std::invalid_argument("channel: transition row " +
                                    std::to_string(h + 1) + " does not sum to 1");
    }
    if (stationary_.empty()) stationary_ = solve_stationary();
    if (stationary_.size() != k)
      throw std::invalid_argument("channel: stationary vector has wrong size");

    cdf_.resize(k * k);
    for (std::size_t h = 0; h < k; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        acc += transition_[h * k + j];
        cdf_[h * k + j] = acc;
      }
    }
  }

  int size() const { return static_cast<int>(boundaries_.size()); }
  double average_snr() const { return average_snr_; }
  std::span<const double> boundaries() const { return boundaries_; }
  std::span<const double> stationary() const { return stationary_; }
  std::span<const double> transition_data() const { return transition_; }
  const ChannelDiagnostics& diagnostics() const { return diagnostics_; }

  double transition(int h, int next) const {
    return transition_[static_cast<std::size_t>(h) * boundaries_.size() +
                       static_cast<std::size_t>(next)];
  }
  std::span<const double> row(int h) const {
    const std::size_t k = boundaries_.size();
    return {transition_.data() + static_cast<std::size_t>(h) * k, k};
  }
  std::span<const double> row_cdf(int h) const {
    const std::size_t k = boundaries_.size();
    return {cdf_.data() + static_cast<std::size_t>(h) * k, k};
  }

  /// Same boundaries, different dynamics (used for hand-modified matrices).
  FsmcChannel with_transition(std::vector<double> transition) const {
    ChannelDiagnostics diag = diagnostics_;
    diag.transition_overridden = true;
    diag.clamps.clear();
    diag.large_offdiagonal_states.clear();
    return FsmcChannel(boundaries_, std::move(transition), average_snr_, {},
                       std::move(diag));
  }

 private:
  std::vector<double> solve_stationary() const {
    const Eigen::Index k = static_cast<Eigen::Index>(boundaries_.size());
    Eigen::MatrixXd a(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        a(i, j) = transition_[static_cast<std::size_t>(j * k + i)] -
                  (i == j ? 1.0 : 0.0);
    a.row(k - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
    rhs(k - 1) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(rhs);
    std::vector<double> out(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      out[static_cast<std::size_t>(i)] = std::max(0.0, pi(i));
      sum += out[static_cast<std::size_t>(i)];
    }
    for (double& p : out) p /= sum;
    return out;
  }

  double average_snr_;
  std::vector<double> boundaries_;
  std::vector<double> transition_;
  std::vector<double> stationary_;
  std::vector<double> cdf_;
  ChannelDiagnostics diagnostics_;
};

/// Rayleigh SNR quantile: the SNR below which a fraction `p` of time is spent.
inline double rayleigh_snr_quantile(double average_snr, double p) {
  return -average_snr * std::log1p(-p);
}

/// Level-crossing rate of the SNR threshold `snr` for Rayleigh fading.
inline double level_crossing_rate(double snr, double average_snr,
                                  double doppler_hz) {
  return std::sqrt(2.0 * std::numbers::pi * snr / average_snr) * doppler_hz *
         std::exp(-snr / average_snr);
}

/// Equiprobable-partition FSMC with level-crossing-rate transitions between
/// adjacent states.
inline FsmcChannel build_fsmc(const ChannelParams& params) {
  params.validate();
  const int k = params.num_states;
  const double kd = static_cast<double>(k);

  std::vector<double> boundaries(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    boundaries[static_cast<std::size_t>(i)] =
        rayleigh_snr_quantile(params.average_snr, static_cast<double>(i) / kd);

  ChannelDiagnostics diag;
  diag.fast_fading_warning = params.normalized_doppler() > 0.01 + 1e-12;

  const double pi_k = 1.0 / kd;
  std::vector<double> p(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0.0);
  auto at = [&](int i, int j) -> double& {
    return p[static_cast<std::size_t>(i) * static_cast<std::size_t>(k) +
             static_cast<std::size_t>(j)];
  };
  for (int i = 0; i < k; ++i) {
    double up = 0.0;
    double down = 0.0;
    if (i + 1 < k)
      up = level_crossing_rate(boundaries[static_cast<std::size_t>(i + 1)],
                               params.average_snr, params.doppler_hz) *
           params.epoch_seconds / pi_k;
    if (i > 0)
      down = level_crossing_rate(boundaries[static_cast<std::size_t>(i)],
                                 params.average_snr, params.doppler_hz) *
             params.epoch_seconds / pi_k;
    if (up > 0.5 || down > 0.5) diag.large_offdiagonal_states.push_back(i);
    if (up + down > 1.0) {
      diag.clamps.push_back({i, up, down});
      const double s = up + down;
      up /= s;
      down /= s;
    }
    if (i + 1 < k) at(i, i + 1) = up;
    if (i > 0) at(i, i - 1) = down;
    at(i, i) = std::max(0.0, 1.0 - up - down);
  }

  std::vector<double> stationary;
  if (diag.clamps.empty())
    stationary.assign(static_cast<std::size_t>(k), pi_k);
  return FsmcChannel(std::move(boundaries), std::move(p), params.average_snr,
                     std::move(stationary), std::move(diag));
}

/// Draws the next channel state from row `h` of the transition matrix.
inline int sample_next_state(const FsmcChannel& channel, int h, Rng& rng) {
  if (h < 0 || h >= channel.size())
    throw std::out_of_range("sample_next_state: channel state out of range");
  return static_cast<int>(draw_from_cdf(channel.row_cdf(h), uniform01(rng)));
}

}  // namespace mqam
