#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "exoplore/gait_generator.hpp"
#include "exoplore/surrogate.hpp"

using namespace exoplore;

namespace {
bool one_per_bin(const Eigen::MatrixXd& pts, const std::vector<Interval>& box) {
  const auto n = pts.rows();
  for (Eigen::Index k = 0; k < pts.cols(); ++k) {
    std::vector<int> hits(static_cast<std::size_t>(n), 0);
    const Interval iv = box[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (pts(i, k) - iv.lo) / iv.width();
      const auto bin = static_cast<long>(std::floor(u * static_cast<double>(n)));
      if (bin < 0 || bin >= n) return false;
      ++hits[static_cast<std::size_t>(bin)];
    }
    for (int h : hits)
      if (h != 1) return false;
  }
  return true;
}

Mlp random_net(std::uint64_t seed, Eigen::Index d = 3) {
  Mlp net = make_mlp(d, {7, 5}, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& l : net.layers)
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = u(rng);
  return net;
}

const std::vector<Interval> bowl_box{bounds::gain_kappa, bounds::delay_dt};

Dataset bowl_dataset(std::size_t n, std::uint64_t seed) {
  const PlantedBowl bowl;
  Dataset d;
  d.bounds = bowl_box;
  d.x = lhs_sample(bowl_box, n, seed);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i)
    d.y[i] = planted_bowl_cot({d.x(i, 0), d.x(i, 1)}, {}, bowl, 0.0, 0);
  return d;
}

double bowl_heldout_rmse_fraction(const SurrogateNet& net) {
  const PlantedBowl bowl;
  const Eigen::MatrixXd grid = uniform_grid(bowl_box, {41, 41});
  const Eigen::VectorXd pred = predict(net, grid);
  double se = 0.0, lo = 1e300, hi = -1e300;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const double truth = planted_bowl_cot({grid(i, 0), grid(i, 1)}, {}, bowl, 0.0, 0);
    se += (pred[i] - truth) * (pred[i] - truth);
    lo = std::min(lo, truth);
    hi = std::max(hi, truth);
  }
  return std::sqrt(se / static_cast<double>(grid.rows())) / (hi - lo);
}
}  // namespace

TEST(LhsSample, FourPointsOnePerQuarter) {
  const Eigen::MatrixXd p = lhs_sample({{0.0, 1.0}}, 4, 12);
  std::set<int> quarters;
  for (Eigen::Index i = 0; i < 4; ++i) quarters.insert(static_cast<int>(std::floor(p(i, 0) * 4.0)));
  EXPECT_EQ(quarters, (std::set<int>{0, 1, 2, 3}));
}

TEST(LhsSample, StratifiedAcrossSizesDimsAndSeeds) {
  const std::vector<Interval> box4{{0.0, 1.0}, {-3.0, 5.0}, bounds::gain_kappa, bounds::delay_dt};
  for (std::size_t n : {1u, 4u, 100u, 1000u})
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      EXPECT_TRUE(one_per_bin(lhs_sample({{2.0, 3.0}}, n, seed), {{2.0, 3.0}})) << n << " " << seed;
      EXPECT_TRUE(one_per_bin(lhs_sample(box4, n, seed), box4)) << n << " " << seed;
    }
}

TEST(LhsSample, DeterministicPerSeed) {
  const std::vector<Interval> box{{0.0, 1.0}, {0.0, 2.0}};
  EXPECT_EQ(lhs_sample(box, 50, 3), lhs_sample(box, 50, 3));
  EXPECT_NE(lhs_sample(box, 50, 3), lhs_sample(box, 50, 4));
}

TEST(LhsSample, ZeroWidthIntervalPinsCoordinate) {
  const Eigen::MatrixXd p = lhs_sample({{0.0, 1.0}, {0.6, 0.6}}, 20, 1);
  EXPECT_TRUE((p.col(1).array() == 0.6).all());
}

TEST(UniformGrid, Examples) {
  const Eigen::MatrixXd line = uniform_grid({{0.0, 1.0}}, {3});
  ASSERT_EQ(line.rows(), 3);
  EXPECT_EQ(line(0, 0), 0.0);
  EXPECT_EQ(line(1, 0), 0.5);
  EXPECT_EQ(line(2, 0), 1.0);
  const Eigen::MatrixXd corners = uniform_grid({{0.0, 1.0}, {2.0, 4.0}}, {2, 2});
  ASSERT_EQ(corners.rows(), 4);
  std::set<std::pair<double, double>> got;
  for (Eigen::Index i = 0; i < 4; ++i) got.insert({corners(i, 0), corners(i, 1)});
  EXPECT_EQ(got, (std::set<std::pair<double, double>>{{0, 2}, {0, 4}, {1, 2}, {1, 4}}));
  EXPECT_EQ(uniform_grid({{0, 1}, {0, 1}, {0, 1}}, {3, 4, 5}).rows(), 60);
}

TEST(Forward, ZeroWeightsGiveBias) {
  Mlp net = make_mlp(3, {4, 4}, 1);
  for (auto& l : net.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  net.layers.back().bias[0] = 1.7;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 10).cwiseAbs();
  EXPECT_TRUE((mlp_forward(net, x).array() == 1.7).all());
  EXPECT_TRUE((mlp_input_gradient(net, x).array() == 0.0).all());
}

TEST(Forward, LinearConfigIsAffine) {
  Mlp net = make_mlp(3, {}, 5);
  net.layers[0].weight << 0.5, -2.0, 3.0;
  net.layers[0].bias << 0.25;
  Eigen::MatrixXd x(3, 2);
  x << 0.1, 1.0, 0.2, 0.0, 0.3, 0.5;
  const Eigen::MatrixXd y = mlp_forward(net, x);
  EXPECT_NEAR(y(0, 0), 0.05 - 0.4 + 0.9 + 0.25, 1e-15);
  EXPECT_NEAR(y(0, 1), 0.5 + 1.5 + 0.25, 1e-15);
  const Eigen::MatrixXd g = mlp_input_gradient(net, x);
  for (Eigen::Index c = 0; c < 2; ++c) EXPECT_EQ(g.col(c), net.layers[0].weight.transpose());
}

TEST(InputGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    const Mlp net = random_net(static_cast<std::uint64_t>(t));
    Eigen::VectorXd x(3);
    for (int k = 0; k < 3; ++k) x[k] = u(rng);
    const Eigen::VectorXd g = mlp_input_gradient(net, x);
    Eigen::VectorXd fd(3);
    for (int k = 0; k < 3; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (mlp_forward(net, xp)(0, 0) - mlp_forward(net, xm)(0, 0)) / (2.0 * h);
    }
    EXPECT_LT((g - fd).norm() / std::max(fd.norm(), 1e-8), 1e-4) << t;
  }
}

TEST(InputGradient, SurrogateGradientIsDestandardized) {
  SurrogateNet net;
  net.mlp = random_net(4);
  net.norm.x_bounds = {{0, 1}, {0, 1}, {0, 1}};
  net.norm.y_mean = 2.0;
  net.norm.y_std = 3.0;
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.4);
  EXPECT_TRUE(input_gradient(net, x).isApprox(3.0 * mlp_input_gradient(net.mlp, x).col(0), 1e-14));
  EXPECT_NEAR(forward(net, x), 2.0 + 3.0 * mlp_forward(net.mlp, x)(0, 0), 1e-14);
}

TEST(Huber, Examples) {
  EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber(-2.0, 1.0), 1.5);
  for (double d : {0.3, 1.0, 2.5}) {
    EXPECT_DOUBLE_EQ(huber(d, d), 0.5 * d * d);
    EXPECT_NEAR(huber(std::nextafter(d, 10.0), d), 0.5 * d * d, 1e-12);
  }
  EXPECT_THROW(huber(1.0, 0.0), OutOfRange);
}

TEST(BatchLoss, ParameterGradientMatchesFiniteDifferences) {
  const Mlp net = random_net(9);
  Eigen::MatrixXd x = (Eigen::MatrixXd::Random(3, 16).array() + 1.0) / 2.0;
  Eigen::VectorXd y = Eigen::VectorXd::Random(16);
  SurrogateConfig cfg;
  cfg.huber_delta = 0.3;
  ParamGrad g(net);
  batch_loss(net, x, y, cfg, &g);
  const double h = 1e-6;
  for (std::size_t k = 0; k < net.layers.size(); ++k)
    for (Eigen::Index i = 0; i < net.layers[k].weight.rows(); ++i)
      for (Eigen::Index j = 0; j < net.layers[k].weight.cols(); ++j) {
        Mlp p = net, m = net;
        p.layers[k].weight(i, j) += h;
        m.layers[k].weight(i, j) -= h;
        const double fd = (batch_loss(p, x, y, cfg, nullptr).total() - batch_loss(m, x, y, cfg, nullptr).total()) /
                          (2.0 * h);
        EXPECT_NEAR(g.weight[k](i, j), fd, 1e-6 * std::max(1.0, std::abs(fd))) << k << " " << i << " " << j;
      }
}

TEST(BatchLoss, FiniteDifferencePenaltyAgreesWithAnalytic) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Mlp net = random_net(s);
    Eigen::MatrixXd x = (Eigen::MatrixXd::Random(3, 32).array() + 1.0) / 2.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(32);
    SurrogateConfig cfg;
    const double analytic = batch_loss(net, x, y, cfg, nullptr).penalty;
    cfg.penalty_mode = PenaltyMode::finite_difference;
    const double fd = batch_loss(net, x, y, cfg, nullptr).penalty;
    EXPECT_NEAR(fd, analytic, 1e-3 * std::max(1.0, analytic));
  }
}

TEST(Train, SameSeedSameWeights) {
  const Dataset d = bowl_dataset(200, 3);
  SurrogateConfig cfg;
  cfg.hidden = {8, 8};
  cfg.epochs = 20;
  const auto a = train(d, cfg, 42);
  const auto b = train(d, cfg, 42);
  ASSERT_EQ(a.net.mlp.layers.size(), b.net.mlp.layers.size());
  for (std::size_t k = 0; k < a.net.mlp.layers.size(); ++k) {
    EXPECT_EQ(a.net.mlp.layers[k].weight, b.net.mlp.layers[k].weight);
    EXPECT_EQ(a.net.mlp.layers[k].bias, b.net.mlp.layers[k].bias);
  }
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.net.final_loss, a.loss_curve.back());
}

TEST(Train, LearningRateAnnealsBetweenEndpoints) {
  SurrogateConfig cfg;
  cfg.epochs = 100;
  EXPECT_DOUBLE_EQ(cosine_lr(cfg, 0), cfg.lr_init);
  EXPECT_NEAR(cosine_lr(cfg, 99), cfg.lr_end, 1e-15);
  for (int e = 1; e < 100; ++e) EXPECT_LE(cosine_lr(cfg, e), cosine_lr(cfg, e - 1));
}

TEST(Train, FitsIdentityOnFirstInput) {
  const std::vector<Interval> box{{0.0, 1.0}, {0.0, 1.0}};
  Dataset d;
  d.bounds = box;
  d.x = lhs_sample(box, 1000, 8);
  d.y = d.x.col(0);
  SurrogateConfig cfg;
  cfg.hidden = {32, 32};
  cfg.epochs = 1500;
  cfg.lambda_grad = 0.0;
  const auto r = train(d, cfg, 1);
  const Eigen::MatrixXd grid = uniform_grid(box, {21, 21});
  const Eigen::VectorXd pred = predict(r.net, grid);
  EXPECT_LT((pred - grid.col(0)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Train, PlantedBowlHeldOutRmseWithinFivePercentOfRange) {
  SurrogateConfig cfg;
  cfg.hidden = {64, 64};
  cfg.epochs = 3000;
  const auto r = train(bowl_dataset(2000, 11), cfg, 5);
  const double frac = bowl_heldout_rmse_fraction(r.net);
  RecordProperty("rmse_fraction", std::to_string(frac));
  EXPECT_LT(frac, 0.05);
}

TEST(Train, PlantedBowlWithoutPenaltyFitsClosely) {
  SurrogateConfig cfg;
  cfg.hidden = {64, 64};
  cfg.epochs = 3000;
  cfg.lambda_grad = 0.0;
  const auto r = train(bowl_dataset(2000, 11), cfg, 5);
  EXPECT_LT(bowl_heldout_rmse_fraction(r.net), 0.05);
}

TEST(Train, PenaltyShrinksMeanGradientNorm) {
  const Dataset d = bowl_dataset(1000, 2);
  const Eigen::MatrixXd test = lhs_sample({{0, 1}, {0, 1}}, 1000, 99).transpose();
  SurrogateConfig cfg;
  cfg.hidden = {16, 16};
  cfg.epochs = 300;
  cfg.lambda_grad = 0.0;
  const double free_norm = mean_gradient_norm(train(d, cfg, 3).net, test);
  cfg.lambda_grad = 5e-2;
  const double pen_norm = mean_gradient_norm(train(d, cfg, 3).net, test);
  EXPECT_LT(pen_norm, free_norm);
}

TEST(Train, DivergenceRaisesNonFiniteLoss) {
  const Dataset d = bowl_dataset(100, 1);
  SurrogateConfig cfg;
  cfg.hidden = {8};
  cfg.epochs = 50;
  cfg.lr_init = cfg.lr_end = 1e200;
  EXPECT_THROW(train(d, cfg, 1), NonFiniteLoss);
}

TEST(Train, EmptyDatasetRejected) {
  Dataset d;
  d.bounds = bowl_box;
  d.x.resize(0, 2);
  EXPECT_THROW(train(d, SurrogateConfig{}, 1), Error);
}
