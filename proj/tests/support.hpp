#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mqam/channel.hpp"
#include "mqam/mdp.hpp"

namespace mqam::testing {

inline FsmcChannel fig3_channel(int num_states = 8) {
  return build_fsmc({1.0, 10.0, 1e-3, num_states});
}

/// The paper's reference system: L_B=15, A_m=5, Pois(3), BER 1e-3, beta 0.95.
inline SystemConfig fig3_config(double weight = 1.0, int num_states = 8) {
  return SystemConfig{.queue_size = 15,
                      .max_action = 5,
                      .weight = weight,
                      .ber_constraint = 1e-3,
                      .discount = 0.95,
                      .arrivals = make_poisson_arrivals(3.0, 15),
                      .channel = fig3_channel(num_states),
                      .packet_bits = std::nullopt};
}

/// Rows 7 and 8 (1-based) sent to states 8 and 1: breaks the dominance of
/// the constructed channel.
inline FsmcChannel fig5_channel() {
  const auto ch = fig3_channel();
  const auto src = ch.transition_data();
  std::vector<double> p;
  p.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) p.push_back(i >= 48 ? 0.0 : src[i]);
  p.at(6 * 8 + 7) = 1.0;
  p.at(7 * 8 + 0) = 1.0;
  return ch.with_transition(p);
}

/// Probability vector with random (exponential) weights; `sparsity` is the
/// chance each entry is forced to zero (at least one entry stays positive).
inline std::vector<double> random_pmf(std::mt19937_64& rng, int n, double sparsity = 0.0) {
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (auto& x : p) {
    x = u(rng) < sparsity ? 0.0 : e(rng);
    sum += x;
  }
  if (sum == 0.0) {
    p[std::uniform_int_distribution<int>(0, n - 1)(rng)] = 1.0;
    return p;
  }
  for (auto& x : p) x /= sum;
  // Make the sum exact to the last bit on the largest entry.
  double s = 0.0;
  for (auto& x : p) s += x;
  *std::max_element(p.begin(), p.end()) += 1.0 - s;
  return p;
}

/// Arbitrary valid FSMC: random increasing boundaries (lowest may be 0) and
/// a random row-stochastic matrix.
inline FsmcChannel random_channel(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double mean = std::pow(10.0, u(rng) * 3.0 - 1.0);
  std::vector<double> bounds(static_cast<std::size_t>(k));
  double g = u(rng) < 0.5 ? 0.0 : mean * 0.05 * u(rng);
  for (auto& b : bounds) {
    b = g;
    g += mean * (0.05 + u(rng));
  }
  std::vector<double> p;
  for (int i = 0; i < k; ++i) {
    const auto row = random_pmf(rng, k, 0.3);
    p.insert(p.end(), row.begin(), row.end());
  }
  return FsmcChannel(std::move(bounds), std::move(p), mean);
}

struct RandomConfigRanges {
  int min_queue = 4;
  int max_queue = 20;
  int max_states = 10;
  double min_weight = 0.01;
  double max_weight = 1000.0;
  double max_discount = 0.99;
};

inline SystemConfig random_config(std::mt19937_64& rng, const RandomConfigRanges& r = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int lb = std::uniform_int_distribution<int>(r.min_queue, r.max_queue)(rng);
  const int am = std::uniform_int_distribution<int>(std::min(1, lb), lb)(rng);
  const int k = std::uniform_int_distribution<int>(1, r.max_states)(rng);
  const double w = std::exp(std::log(r.min_weight) +
                            u(rng) * (std::log(r.max_weight) - std::log(r.min_weight)));
  const double beta = u(rng) * r.max_discount;
  const double ber = std::pow(10.0, -1.0 - 5.0 * u(rng));
  ArrivalDist arrivals = u(rng) < 0.5
                             ? make_poisson_arrivals(u(rng) * lb * 0.6, lb)
                             : ArrivalDist{random_pmf(rng, lb + 1, 0.4)};
  return SystemConfig{.queue_size = lb,
                      .max_action = am,
                      .weight = w,
                      .ber_constraint = ber,
                      .discount = beta,
                      .arrivals = std::move(arrivals),
                      .channel = random_channel(rng, k),
                      .packet_bits = std::nullopt};
}

}  // namespace mqam::testing
