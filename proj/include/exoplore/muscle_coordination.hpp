// Muscle coordination loss with an intramuscular coherence term and a
// box-constrained activation solver.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "exoplore/domain.hpp"

namespace exoplore {

class BadPartition : public Error {
 public:
  explicit BadPartition(const std::string& why) : Error("bad muscle partition: " + why) {}
};

/// Joint torque per unit activation, joints x muscles.
using MomentMatrix = Eigen::MatrixXd;
using Groups = std::vector<std::vector<std::size_t>>;

struct McnWeights {
  double w_reg = 0.01;
  double w_imr = 0.1;
};

/// Deviations from the group mean at or below this are not penalized.
inline constexpr double imr_dead_zone = 0.1;

inline void check_partition(const Groups& groups, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw BadPartition("empty group");
    for (auto i : g) {
      if (i >= n) throw BadPartition("index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw BadPartition("index " + std::to_string(i) + " repeated");
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw BadPartition("index " + std::to_string(i) + " not covered");
}

namespace detail {
inline double group_mean(const Eigen::VectorXd& a, const std::vector<std::size_t>& g) {
  double s = 0.0;
  for (auto j : g) s += a[j];
  return s / static_cast<double>(g.size());
}

inline double imr_unchecked(const Eigen::VectorXd& a, const Groups& groups) {
  double loss = 0.0;
  for (const auto& g : groups) {
    const double mean = group_mean(a, g);
    for (auto j : g) {
      const double d = a[j] - mean;
      if (std::abs(d) > imr_dead_zone) loss += d * d;
    }
  }
  return loss;
}

/// Subgradient: zero for members inside the dead zone.
inline void imr_gradient(const Eigen::VectorXd& a, const Groups& groups, double scale,
                         Eigen::VectorXd& grad) {
  for (const auto& g : groups) {
    const double mean = group_mean(a, g);
    double active_sum = 0.0;
    for (auto j : g) {
      const double d = a[j] - mean;
      if (std::abs(d) > imr_dead_zone) {
        grad[j] += 2.0 * scale * d;
        active_sum += d;
      }
    }
    const double shift = 2.0 * scale * active_sum / static_cast<double>(g.size());
    for (auto j : g) grad[j] -= shift;
  }
}
}  // namespace detail

/// Sum over groups of squared deviations from the group mean, gated by the dead zone.
inline double imr_loss(const Eigen::VectorXd& a, const Groups& groups) {
  check_partition(groups, static_cast<std::size_t>(a.size()));
  return detail::imr_unchecked(a, groups);
}

inline double mcn_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& tau_target,
                       const MomentMatrix& m, const McnWeights& w, const Groups& groups) {
  if (m.cols() != a.size())
    throw DimensionMismatch("mcn_loss activations", static_cast<std::size_t>(m.cols()),
                            static_cast<std::size_t>(a.size()));
  if (m.rows() != tau_target.size())
    throw DimensionMismatch("mcn_loss torques", static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(tau_target.size()));
  check_partition(groups, static_cast<std::size_t>(a.size()));
  return (tau_target - m * a).squaredNorm() + w.w_reg * a.squaredNorm() +
         w.w_imr * detail::imr_unchecked(a, groups);
}

struct ActivationSolution {
  Eigen::VectorXd activations;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;  // false: iteration cap hit; best iterate returned
  std::vector<double> loss_history;  // accepted-step losses of the winning start
};

struct SolverOptions {
  int max_iters = 5000;
  double initial_step = 1e-2;
  double initial_activation = 0.1;
  double tolerance = 1e-10;  // on the projected-gradient step
  int random_restarts = 4;
};

namespace detail {
inline ActivationSolution projected_descent(Eigen::VectorXd a, const Eigen::VectorXd& tau,
                                            const MomentMatrix& m, const McnWeights& w,
                                            const Groups& groups, const SolverOptions& opt) {
  auto loss_of = [&](const Eigen::VectorXd& x) {
    return (tau - m * x).squaredNorm() + w.w_reg * x.squaredNorm() +
           w.w_imr * imr_unchecked(x, groups);
  };
  ActivationSolution out;
  double f = loss_of(a);
  out.loss_history.push_back(f);
  double step = opt.initial_step;
  Eigen::VectorXd grad(a.size()), prev_a, prev_grad;
  auto gradient_at = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -2.0 * m.transpose() * (tau - m * x) + 2.0 * w.w_reg * x;
    imr_gradient(x, groups, w.w_imr, g);
  };
  gradient_at(a, grad);
  for (int it = 1; it <= opt.max_iters; ++it) {
    out.iterations = it;
    bool accepted = false;
    while (step > 1e-16) {
      const Eigen::VectorXd trial = (a - step * grad).cwiseMax(0.0).cwiseMin(1.0);
      const double ft = loss_of(trial);
      if (ft < f) {
        prev_a = std::move(a);
        prev_grad = grad;
        a = trial;
        f = ft;
        out.loss_history.push_back(f);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // No descent direction left at machine scale: a projected stationary point.
    if (!accepted) {
      out.converged = true;
      break;
    }
    gradient_at(a, grad);
    // Projected-gradient stationarity.
    if (((a - grad).cwiseMax(0.0).cwiseMin(1.0) - a).lpNorm<Eigen::Infinity>() < opt.tolerance) {
      out.converged = true;
      break;
    }
    // Barzilai-Borwein step from the last accepted move; backtracking above keeps descent.
    const Eigen::VectorXd s = a - prev_a, y = grad - prev_grad;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e6) : opt.initial_step;
  }
  out.activations = std::move(a);
  out.loss = f;
  return out;
}
}  // namespace detail

/// Minimizes the coordination loss over [0, 1]^n by projected gradient descent.
/// Starts from a uniform small activation plus seeded random restarts; returns the best.
inline ActivationSolution solve_activations(const Eigen::VectorXd& tau_target,
                                            const MomentMatrix& m, const McnWeights& w,
                                            const Groups& groups, int max_iters,
                                            std::uint64_t seed, SolverOptions opt = {}) {
  if (m.rows() != tau_target.size())
    throw DimensionMismatch("solve_activations", static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(tau_target.size()));
  const auto n = m.cols();
  check_partition(groups, static_cast<std::size_t>(n));
  opt.max_iters = max_iters;

  ActivationSolution best = detail::projected_descent(
      Eigen::VectorXd::Constant(n, opt.initial_activation), tau_target, m, w, groups, opt);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int r = 0; r < opt.random_restarts; ++r) {
    Eigen::VectorXd a0(n);
    for (Eigen::Index i = 0; i < n; ++i) a0[i] = unit(rng);
    auto sol = detail::projected_descent(std::move(a0), tau_target, m, w, groups, opt);
    if (sol.loss < best.loss) best = std::move(sol);
  }
  return best;
}

}  // namespace exoplore
