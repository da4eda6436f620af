#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "exoplore/rewards.hpp"

using namespace exoplore;

TEST(RewardWeights, DefaultsMatchPublishedTable) {
  const RewardWeights w;
  EXPECT_EQ(w.w_gait, 1.0);
  EXPECT_EQ(w.w_energy, 0.35);
  EXPECT_EQ(w.w_arm, 1.0);
  EXPECT_EQ(w.w_hei, 0.1);
  EXPECT_EQ(w.k_alive, 0.1);
  EXPECT_EQ(w.k_energy, 0.2);
  EXPECT_FALSE(validate(w));
}

TEST(RewardWeights, RejectsNonPositiveSigma) {
  RewardWeights w;
  w.sigma_head = 0.0;
  EXPECT_TRUE(validate(w));
  w = {};
  w.k_alive = 1.5;
  EXPECT_TRUE(validate(w));
}

TEST(GaitReward, PerfectTrackingIsOne) {
  const GaitReward r = gait_reward(0.0, 0.0, {}, {}, RewardWeights{});
  EXPECT_EQ(r.r_step, 1.0);
  EXPECT_EQ(r.r_vel, 1.0);
  EXPECT_EQ(r.r_head, 1.0);
  EXPECT_EQ(r.r_sway, 1.0);
  EXPECT_EQ(r.r_gait, 1.0);
}

TEST(GaitReward, FootErrorAtSigmaGivesInverseE) {
  const RewardWeights w;
  EXPECT_NEAR(gait_reward(w.sigma_step, 0.0, {}, {}, w).r_step, std::exp(-1.0), 1e-15);
  EXPECT_NEAR(gait_reward(w.sigma_step, 0.0, {}, {}, w).r_step, 0.36788, 1e-5);
}

TEST(GaitReward, HeadTiltAsymptoteIsKAlive) {
  const RewardWeights w;
  EXPECT_NEAR(gait_reward(0.0, 0.0, {1e6, 0.0, 0.0}, {}, w).r_head, 0.1, 1e-12);
}

TEST(GaitReward, HeadFactorsContinuousAtThreshold) {
  const RewardWeights w;
  const double eps[] = {1e-3, 1e-6, 1e-9};
  for (double e : eps) {
    const double r = gait_reward(0.0, 0.0, {w.lambda_r + e, 0.0, 0.0}, {}, w).r_head;
    EXPECT_GE(r, w.k_alive);
    EXPECT_NEAR(r, 1.0, 10.0 * e);
  }
}

TEST(GaitReward, SwayGatedByDelta) {
  const RewardWeights w;
  SwayInput s;
  s.pelvis = {w.delta_pelvis * 0.99, 0.0};
  EXPECT_EQ(gait_reward(0.0, 0.0, {}, s, w).r_sway, 1.0);
  s.pelvis = {w.delta_pelvis + 0.5, 0.0};
  EXPECT_NEAR(gait_reward(0.0, 0.0, {}, s, w).r_sway, std::exp(-std::pow(0.5 / w.sigma_sway, 2)), 1e-12);
}

TEST(GaitReward, ProductBelowEachFactor) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  const RewardWeights w;
  for (int i = 0; i < 300; ++i) {
    SwayInput s{{u(rng), 0.0}, {u(rng), u(rng)}, {u(rng), 0.0}};
    const GaitReward r = gait_reward(u(rng), u(rng), {u(rng), u(rng), u(rng)}, s, w);
    EXPECT_LE(r.r_gait, std::min({r.r_step, r.r_vel, r.r_head, r.r_sway}));
    for (double v : {r.r_step, r.r_vel, r.r_head, r.r_sway}) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GaitReward, StrictlyDecreasingInErrors) {
  const RewardWeights w;
  double prev_step = 2.0, prev_head = 2.0;
  for (double e = 0.05; e < 3.0; e += 0.05) {
    const GaitReward r = gait_reward(e, 0.0, {w.lambda_r + e, 0.0, 0.0}, {}, w);
    EXPECT_LT(r.r_step, prev_step);
    EXPECT_LT(r.r_head, prev_head);
    prev_step = r.r_step;
    prev_head = r.r_head;
  }
}

TEST(ArmReward, Examples) {
  const std::vector<double> zero{0.0, 0.0, 0.0};
  EXPECT_EQ(arm_reward(zero, 1.0), 1.0);
  const std::vector<double> one{0.7};
  EXPECT_NEAR(arm_reward(one, 0.7), std::exp(-1.0), 1e-15);
  const std::vector<double> two{0.7, -0.7};
  EXPECT_NEAR(arm_reward(two, 0.7), 0.13534, 1e-5);
}

TEST(EnergyReward, Examples) {
  EXPECT_EQ(energy_reward(0.0, 0.2), 1.0);
  EXPECT_NEAR(energy_reward(2.5, 0.2), 0.5, 1e-15);
  EXPECT_NEAR(energy_reward(10.0, 0.2), -1.0, 1e-15);
}

TEST(HeiReward, ResistanceMinimization) {
  EXPECT_DOUBLE_EQ(hei_reward(-2.0, 3.0, 8.0, HeiVariant::resistance_min), 0.75);
  EXPECT_EQ(hei_reward(1.0, 3.0, 8.0, HeiVariant::resistance_min), 1.0);
  EXPECT_EQ(hei_reward(-5.0, -3.0, 0.0, HeiVariant::resistance_min), 1.0);
}

TEST(HeiReward, AssistMaximizationAndNone) {
  EXPECT_DOUBLE_EQ(hei_reward(-2.0, 3.0, 6.0, HeiVariant::assist_max), 0.5);
  EXPECT_EQ(hei_reward(-2.0, 3.0, 0.0, HeiVariant::assist_max), 0.0);
  EXPECT_EQ(hei_reward(-2.0, 3.0, 6.0, HeiVariant::none), 0.0);
}

TEST(HeiReward, AtMostOneWithEqualityOnlyWithoutResistance) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> p(-10.0, 10.0), k(0.1, 21.0);
  for (int i = 0; i < 500; ++i) {
    const double pl = p(rng), pr = p(rng);
    const double r = hei_reward(pl, pr, k(rng), HeiVariant::resistance_min);
    EXPECT_LE(r, 1.0);
    EXPECT_EQ(r == 1.0, pl >= 0.0 && pr >= 0.0);
  }
}

TEST(TotalReward, PublishedWeightsSum) {
  EXPECT_NEAR(total_reward({1.0, 1.0, 1.0, 1.0}, RewardWeights{}), 2.45, 1e-15);
  EXPECT_EQ(total_reward({0.0, 0.0, 0.0, 0.0}, RewardWeights{}), 0.0);
  EXPECT_EQ(total_reward({1.0, 0.0, 0.0, 0.0}, RewardWeights{}), 1.0);
}

TEST(TotalReward, BreakdownConsistent) {
  const RewardWeights w;
  const std::vector<double> arm{0.1, 0.2};
  const RewardBreakdown b = evaluate_rewards(0.3, 0.2, {0.05, 0.0, 0.1}, {}, arm, 1.5, -1.0, 2.0, 8.0,
                                             HeiVariant::resistance_min, w);
  EXPECT_NEAR(b.r_gait, b.r_step * b.r_vel * b.r_head * b.r_sway, 1e-15);
  EXPECT_NEAR(b.r_total, w.w_gait * b.r_gait + w.w_arm * b.r_arm + w.w_energy * b.r_energy + w.w_hei * b.r_hei,
              1e-15);
  EXPECT_NEAR(b.r_hei, 1.0 - 1.0 / 8.0, 1e-15);
}
