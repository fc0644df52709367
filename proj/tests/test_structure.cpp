#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "mqam/structure.hpp"
#include "support.hpp"

namespace {

using namespace mqam;
using mqam::testing::fig3_config;

Policy make_policy(int nb, int nh, std::initializer_list<int> column_major) {
  Policy p(nb, nh);
  auto it = column_major.begin();
  for (int h = 0; h < nh; ++h)
    for (int b = 0; b < nb; ++b) p(b, h) = *it++;
  return p;
}

TEST(CellChecks, DropInQueueIsReportedAtItsLowerState) {
  // theta(2, 1) = 3 and theta(3, 1) = 2 (channel state 1 is h = 0).
  const auto p = make_policy(5, 2, {0, 1, 3, 2, 3, 0, 0, 1, 1, 2});
  const auto r = check_monotone_b(p);
  EXPECT_FALSE(r.ok);
  ASSERT_EQ(r.witnesses.size(), 1u);
  EXPECT_EQ(r.witnesses[0], (Cell{2, 0}));
  const auto m = check_bounded_marginal(p);
  ASSERT_EQ(m.witnesses.size(), 1u);
  EXPECT_EQ(m.witnesses[0], (Cell{1, 0}));
}

TEST(CellChecks, ChannelDropWitness) {
  const auto p = make_policy(3, 3, {0, 1, 1, 0, 1, 1, 0, 1, 2});
  EXPECT_TRUE(check_monotone_b(p).ok);
  const auto r = check_monotone_h(p);
  EXPECT_TRUE(r.ok);
  const auto q = make_policy(3, 3, {0, 1, 2, 0, 1, 2, 0, 0, 2});
  const auto r2 = check_monotone_h(q);
  ASSERT_EQ(r2.witnesses.size(), 1u);
  EXPECT_EQ(r2.witnesses[0], (Cell{1, 1}));
}

TEST(CellChecks, ConstantPolicyPassesEverything) {
  const Policy p(16, 8, 2);
  EXPECT_TRUE(check_monotone_b(p).ok);
  EXPECT_TRUE(check_bounded_marginal(p).ok);
  EXPECT_TRUE(check_monotone_h(p).ok);
}

TEST(Corollary1, MatchesClosedForm) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto cfg = mqam::testing::random_config(rng);
    const auto r = check_corollary1(cfg);
    const int k = cfg.channel.size();
    const double scale = -std::log(5.0 * cfg.ber_constraint) / 1.5;
    double bound = std::numeric_limits<double>::infinity();
    double slack = std::numeric_limits<double>::infinity();
    for (int h = 0; h + 1 < k; ++h) {
      const double gap = 1.0 / transmission_snr(cfg.channel, h) -
                         1.0 / transmission_snr(cfg.channel, h + 1);
      bound = std::min(bound, 2.0 * scale * gap);
      for (int a = 0; a < cfg.max_action; ++a)
        slack = std::min(slack, scale * std::exp2(a) * gap - cfg.weight);
    }
    if (k == 1) {
      EXPECT_TRUE(std::isinf(r.bound));
      EXPECT_TRUE(r.bound_ok);
      continue;
    }
    EXPECT_NEAR(r.bound, bound, 1e-9 * std::abs(bound));
    EXPECT_NEAR(r.slack, slack, 1e-9 * std::max(1.0, std::abs(slack)));
    EXPECT_EQ(r.bound_ok, cfg.weight <= r.bound);
    EXPECT_NEAR(r.margin(), r.bound - cfg.weight, 1e-12 * std::abs(r.bound));
  }
}

TEST(Corollary1, CrossDifferenceAtIdleIsHalfTheBoundTerm) {
  const auto cfg = fig3_config(1.0);
  for (int h = 0; h + 1 < 8; ++h) {
    const double cross = transmission_cost(h + 1, 0, cfg) + transmission_cost(h, 1, cfg) -
                         transmission_cost(h, 0, cfg) - transmission_cost(h + 1, 1, cfg);
    const double term = -2.0 * std::log(5e-3) / 1.5 *
                        (1.0 / transmission_snr(cfg.channel, h) -
                         1.0 / transmission_snr(cfg.channel, h + 1));
    EXPECT_NEAR(cross, 0.5 * term, 1e-12 * term);
  }
  const auto r = check_corollary1(cfg);
  EXPECT_TRUE(r.bound_ok);
  EXPECT_GT(r.margin(), 0.0);
  EXPECT_FALSE(r.slack_ok);
  EXPECT_EQ(r.slack_action, 0);
}

TEST(Dominance, IdentityMatrixDominates) {
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[i * 5] = 1.0;
  EXPECT_TRUE(check_first_order_dominance(eye, 4).ok);
}

TEST(Dominance, Fig5OverrideBreaksIt) {
  const auto r = check_first_order_dominance(mqam::testing::fig5_channel());
  EXPECT_FALSE(r.ok);
  bool saw_last_pair = false;
  for (const auto& w : r.witnesses) saw_last_pair |= w.h == 6;
  EXPECT_TRUE(saw_last_pair);
}

TEST(Dominance, ConstructedChannelsAtSlowFading) {
  for (int k = 1; k <= 12; ++k)
    for (double snr : {0.1, 1.0, 10.0, 100.0})
      EXPECT_TRUE(check_first_order_dominance(build_fsmc({snr, 10.0, 1e-3, k})).ok);
}

TEST(Dominance, ImpliesOrderedExpectationsOfIncreasingFunctions) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int dominant = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = 2 + trial % 6;
    const auto ch = trial % 2 ? mqam::testing::fig3_channel(k)
                              : mqam::testing::random_channel(rng, k);
    const bool ok = check_first_order_dominance(ch, 0.0).ok;
    std::vector<double> f(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (auto& x : f) x = acc += u(rng);
    if (!ok) continue;
    ++dominant;
    for (int h = 0; h + 1 < k; ++h) {
      double lo = 0.0, hi = 0.0;
      for (int j = 0; j < k; ++j) {
        lo += ch.transition(h, j) * f[j];
        hi += ch.transition(h + 1, j) * f[j];
      }
      EXPECT_GE(hi, lo - 1e-12 * (1.0 + std::abs(lo)));
    }
  }
  EXPECT_GE(dominant, 500);
}

TEST(Dominance, RejectsNonStochasticInput) {
  const std::vector<double> bad{0.5, 0.4, 0.0, 1.0};
  EXPECT_THROW(check_first_order_dominance(bad, 2), std::invalid_argument);
  EXPECT_THROW(check_first_order_dominance(bad, 3), std::invalid_argument);
  const std::vector<double> neg{1.5, -0.5, 0.0, 1.0};
  EXPECT_THROW(check_first_order_dominance(neg, 2), std::invalid_argument);
}

TEST(QChecks, Fig3QIsSubmodularAndLNatural) {
  const SystemModel m(fig3_config(1.0));
  const auto r = value_iteration(m);
  const QTable q(m, r.values);
  EXPECT_TRUE(check_q_submodular(q).ok);
  EXPECT_TRUE(check_q_lnatural(q).ok);
}

TEST(QChecks, Fig4QFailsInChannelAndAction) {
  const SystemModel m(fig3_config(400.0));
  const auto r = value_iteration(m);
  const QTable q(m, r.values);
  const auto sub = check_q_submodular(q);
  EXPECT_FALSE(sub.ok);
  bool channel_action = false;
  for (const auto& w : sub.witnesses) channel_action |= w.family == "h,a";
  EXPECT_TRUE(channel_action);
  EXPECT_TRUE(check_q_lnatural(q).ok);
}

TEST(QChecks, ImmediateCostAloneIsLNatural) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const SystemModel m(mqam::testing::random_config(rng));
    EXPECT_TRUE(check_q_lnatural(m, ValueFunction(m, 0.0)).ok) << "trial " << trial;
  }
}

TEST(QChecks, BruteForceWitnessOnHandBuiltTable) {
  // Q(b, a) on a 2x2 grid with Q(0,0)+Q(1,1) > Q(1,0)+Q(0,1).
  const FsmcChannel ch({0.5}, {1.0}, 1.0);
  const SystemConfig cfg{.queue_size = 1,
                         .max_action = 1,
                         .weight = 1.0,
                         .ber_constraint = 1e-3,
                         .discount = 0.5,
                         .arrivals = ArrivalDist{{1.0, 0.0}},
                         .channel = ch};
  const SystemModel m(cfg);
  // V high at the empty queue makes serving at b=1 unattractive relative
  // to b=0, which breaks submodularity in (b, a).
  ValueFunction v(m);
  v(0, 0) = 1000.0;
  v(1, 0) = 0.0;
  const auto r = check_q_submodular(m, v);
  EXPECT_FALSE(r.ok);
  ASSERT_EQ(r.witnesses.size(), 1u);
  EXPECT_EQ(r.witnesses[0].family, "b,a");
  const double q00 = q_value(m, v, 0, 0, 0), q01 = q_value(m, v, 0, 0, 1);
  const double q10 = q_value(m, v, 1, 0, 0), q11 = q_value(m, v, 1, 0, 1);
  EXPECT_LT(q10 + q01, q00 + q11);
}

// Smallest minimiser read straight off a Q table.
Policy argmin_policy(const QTable& q) {
  Policy p(q.num_queue(), q.num_channel());
  for (int b = 0; b < q.num_queue(); ++b)
    for (int h = 0; h < q.num_channel(); ++h) {
      int best = 0;
      for (int a = 1; a < q.num_actions(); ++a)
        if (q(b, h, a) < q(b, h, best)) best = a;
      p(b, h) = best;
    }
  return p;
}

TEST(QChecks, LNaturalImpliesMonotoneBoundedPolicy) {
  std::mt19937_64 rng(31);
  int premises = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto cfg = fig3_config(std::exp(std::log(0.01) + u(rng) * std::log(1e5)),
                           std::uniform_int_distribution<int>(1, 8)(rng));
    cfg.discount = 0.95 * u(rng);
    cfg.arrivals = make_poisson_arrivals(6.0 * u(rng), 15);
    const SystemModel m(cfg);
    const auto r = value_iteration(m, {.epsilon = 1e-6});
    const QTable q(m, r.values);
    if (!check_q_lnatural(q).ok) continue;
    ++premises;
    const auto p = argmin_policy(q);
    EXPECT_TRUE(check_monotone_b(p).ok) << "trial " << trial;
    EXPECT_TRUE(check_bounded_marginal(p).ok) << "trial " << trial;
  }
  EXPECT_GT(premises, 30);
}

TEST(Thresholds, RoundTripOfMonotonePolicies) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int lb = 1 + trial % 15, am = 1 + trial % std::max(1, lb), k = 1 + trial % 5;
    Policy p(lb + 1, k);
    for (int h = 0; h < k; ++h) {
      int a = 0;
      for (int b = 0; b <= lb; ++b) {
        a = std::min(am, a + std::uniform_int_distribution<int>(0, 2)(rng) / 2 *
                                 std::uniform_int_distribution<int>(1, 3)(rng));
        p(b, h) = a;
      }
    }
    const auto phi = policy_to_thresholds(p, am);
    EXPECT_TRUE(phi.feasible());
    EXPECT_EQ(thresholds_to_policy(phi), p);
    for (int v : phi.values()) {
      EXPECT_GE(v, 0);
      EXPECT_LE(v, lb + 1);
    }
  }
}

TEST(Thresholds, EdgeRows) {
  const auto idle = policy_to_thresholds(Policy(16, 2, 0), 5);
  for (int v : idle.values()) EXPECT_EQ(v, 16);
  EXPECT_EQ(idle.never(), 16);
  const auto full = policy_to_thresholds(Policy(16, 2, 5), 5);
  for (int v : full.values()) EXPECT_EQ(v, 0);
}

TEST(Thresholds, StepFunctionOracle) {
  ThresholdVector phi(1, 3, 9);
  phi.at(0, 1) = 2;
  phi.at(0, 2) = 2;
  phi.at(0, 3) = 7;
  const auto p = thresholds_to_policy(phi);
  const std::vector<int> expected{0, 0, 2, 2, 2, 2, 2, 3, 3, 3};
  for (int b = 0; b <= 9; ++b) EXPECT_EQ(p(b, 0), expected[b]) << "b=" << b;
}

TEST(Thresholds, RejectsInfeasibleInput) {
  ThresholdVector phi(1, 2, 5);
  phi.at(0, 1) = 4;
  phi.at(0, 2) = 1;
  EXPECT_FALSE(phi.feasible());
  EXPECT_THROW(thresholds_to_policy(phi), std::invalid_argument);
  EXPECT_NO_THROW(thresholds_to_policy_lenient(phi));
  phi.repair();
  EXPECT_TRUE(phi.feasible());
  EXPECT_EQ(phi.at(0, 1), 1);
  EXPECT_EQ(phi.at(0, 2), 4);
  EXPECT_THROW(policy_to_thresholds(make_policy(3, 1, {1, 0, 1}), 1), std::invalid_argument);
}

TEST(StructureReport, Fig3Report) {
  const SystemModel m(fig3_config(1.0));
  const auto r = value_iteration(m);
  const auto rep = build_structure_report(m, r.policy, &r.values);
  EXPECT_TRUE(rep.unconditional_ok());
  EXPECT_TRUE(rep.monotone_h.ok);
  EXPECT_TRUE(rep.dominance.ok);
  ASSERT_TRUE(rep.q_submodular.has_value());
  EXPECT_TRUE(rep.q_submodular->ok);
  EXPECT_FALSE(build_structure_report(m, r.policy).q_lnatural.has_value());
}

}  // namespace
