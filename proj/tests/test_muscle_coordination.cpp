#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "exoplore/muscle_coordination.hpp"

using namespace exoplore;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double max_group_deviation(const Eigen::VectorXd& a, const Groups& groups) {
  double worst = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (auto j : g) mean += a[j];
    mean /= static_cast<double>(g.size());
    for (auto j : g) worst = std::max(worst, std::abs(a[j] - mean));
  }
  return worst;
}

// Two line segments of one muscle with a 1:3 capacity split.
struct Redundant {
  MomentMatrix m{MomentMatrix::Constant(1, 2, 0.0)};
  Eigen::VectorXd tau{vec({20.0})};
  Groups groups{{0, 1}};
  Redundant() { m << 10.0, 30.0; }
};
}  // namespace

TEST(ImrLoss, Examples) {
  EXPECT_EQ(imr_loss(vec({0.5, 0.5, 0.5}), {{0, 1, 2}}), 0.0);
  EXPECT_NEAR(imr_loss(vec({0.8, 0.2}), {{0, 1}}), 0.18, 1e-15);
  EXPECT_EQ(imr_loss(vec({0.55, 0.45}), {{0, 1}}), 0.0);
}

TEST(ImrLoss, BadPartitionThrows) {
  EXPECT_THROW(imr_loss(vec({0.1, 0.2}), {{0}}), BadPartition);
  EXPECT_THROW(imr_loss(vec({0.1, 0.2}), {{0, 1}, {1}}), BadPartition);
  EXPECT_THROW(imr_loss(vec({0.1, 0.2}), {{0, 2}}), BadPartition);
  EXPECT_THROW(imr_loss(vec({0.1, 0.2}), {{0, 1}, {}}), BadPartition);
}

TEST(ImrLoss, InvariantToGroupShiftAndPermutation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Groups groups{{0, 1, 2}, {3, 4}};
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd a(5);
    for (int j = 0; j < 5; ++j) a[j] = u(rng);
    const double base = imr_loss(a, groups);
    Eigen::VectorXd shifted = a;
    const double c = u(rng) - 0.5;
    for (int j : {0, 1, 2}) shifted[j] += c;
    EXPECT_NEAR(imr_loss(shifted, groups), base, 1e-12);
    Eigen::VectorXd perm = a;
    std::swap(perm[0], perm[2]);
    std::swap(perm[3], perm[4]);
    EXPECT_NEAR(imr_loss(perm, groups), base, 1e-15);
  }
}

TEST(McnLoss, Examples) {
  MomentMatrix m(1, 2);
  m << 10.0, 20.0;
  EXPECT_EQ(mcn_loss(vec({0.5, 0.25}), vec({10.0}), m, {0.0, 0.1}, {{0}, {1}}), 0.0);
  EXPECT_EQ(mcn_loss(vec({0.0, 0.0}), vec({0.0}), m, {}, {{0, 1}}), 0.0);
  EXPECT_NEAR(mcn_loss(vec({1.0, 0.0}), vec({10.0}), m, {0.01, 0.1}, {{0, 1}}), 0.06, 1e-15);
}

TEST(McnLoss, DimensionMismatchThrows) {
  MomentMatrix m(1, 2);
  m << 1.0, 1.0;
  EXPECT_THROW(mcn_loss(vec({0.1}), vec({1.0}), m, {}, {{0}}), DimensionMismatch);
  EXPECT_THROW(mcn_loss(vec({0.1, 0.1}), vec({1.0, 2.0}), m, {}, {{0, 1}}), DimensionMismatch);
  EXPECT_THROW(solve_activations(vec({1.0, 2.0}), m, {}, {{0, 1}}, 100, 0), DimensionMismatch);
}

TEST(SolveActivations, ZeroTorqueGivesZeroActivation) {
  MomentMatrix m(2, 3);
  m << 5.0, -3.0, 2.0, 1.0, 4.0, -6.0;
  const auto sol = solve_activations(vec({0.0, 0.0}), m, {0.01, 0.1}, {{0, 1}, {2}}, 5000, 1);
  EXPECT_LT(sol.activations.lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(SolveActivations, SingleMuscleClosedForm) {
  MomentMatrix m(1, 1);
  m << 10.0;
  const McnWeights w{1e-3, 0.1};
  const auto sol = solve_activations(vec({5.0}), m, w, {{0}}, 5000, 2);
  const double oracle = 10.0 * 5.0 / (100.0 + w.w_reg);
  EXPECT_NEAR(sol.activations[0], oracle, 1e-5);
  EXPECT_NEAR(sol.activations[0], 0.5, 1e-4);
}

TEST(SolveActivations, BeatsRandomFeasiblePoints) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> mom(-20.0, 20.0), u(0.0, 1.0);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 2 + inst % 5, dofs = 1 + inst % 3;
    MomentMatrix m(dofs, n);
    for (int r = 0; r < dofs; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = mom(rng);
    Eigen::VectorXd tau(dofs);
    for (int r = 0; r < dofs; ++r) tau[r] = 0.5 * mom(rng);
    Groups groups{{0, 1}};
    for (int j = 2; j < n; ++j) groups.push_back({static_cast<std::size_t>(j)});
    const McnWeights w{0.01, 0.1};
    const auto sol = solve_activations(tau, m, w, groups, 5000, static_cast<std::uint64_t>(inst));
    EXPECT_GE(sol.activations.minCoeff(), 0.0);
    EXPECT_LE(sol.activations.maxCoeff(), 1.0);
    EXPECT_NEAR(sol.loss, mcn_loss(sol.activations, tau, m, w, groups), 1e-12);
    double best_random = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
      Eigen::VectorXd a(n);
      for (int j = 0; j < n; ++j) a[j] = u(rng);
      best_random = std::min(best_random, mcn_loss(a, tau, m, w, groups));
    }
    EXPECT_LE(sol.loss, best_random) << "instance " << inst;
  }
}

TEST(SolveActivations, LossHistoryNonIncreasing) {
  const Redundant r;
  const auto sol = solve_activations(r.tau, r.m, {0.01, 1.0}, r.groups, 5000, 3);
  ASSERT_GE(sol.loss_history.size(), 2u);
  for (std::size_t i = 1; i < sol.loss_history.size(); ++i)
    EXPECT_LE(sol.loss_history[i], sol.loss_history[i - 1]);
  EXPECT_EQ(sol.loss_history.back(), sol.loss);
}

TEST(SolveActivations, ImrWeightShrinksWithinGroupDeviation) {
  const Redundant r;
  double prev = std::numeric_limits<double>::infinity();
  for (double w_imr : {0.0, 0.1, 1.0, 10.0}) {
    const auto sol = solve_activations(r.tau, r.m, {0.01, w_imr}, r.groups, 20000, 5);
    const double dev = max_group_deviation(sol.activations, r.groups);
    EXPECT_LE(dev, prev + 1e-6) << "w_imr " << w_imr;
    prev = dev;
  }
  EXPECT_GT(max_group_deviation(solve_activations(r.tau, r.m, {0.01, 0.0}, r.groups, 20000, 5).activations,
                                r.groups),
            0.15);
  EXPECT_LE(prev, 0.12);
}

TEST(SolveActivations, IterationCapReportsNotConverged) {
  const Redundant r;
  const auto sol = solve_activations(r.tau, r.m, {0.01, 0.1}, r.groups, 1, 0, {.random_restarts = 0});
  EXPECT_FALSE(sol.converged);
  EXPECT_LE(sol.loss, sol.loss_history.front());
}
