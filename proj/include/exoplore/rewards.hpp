// Reward terms for gait imitation, energy and human-exoskeleton interaction.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <utility>

#include "exoplore/domain.hpp"

namespace exoplore {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct RewardWeights {
  double w_gait = 1.0;
  double w_energy = 0.35;
  double w_arm = 1.0;
  double w_hei = 0.1;

  double sigma_step = 1.581;
  double sigma_vel = 3.162;
  double sigma_head = 4.0;
  double sigma_sway = 0.816;
  double sigma_arm = 1.0;

  double k_alive = 0.1;
  double k_energy = 0.2;

  double lambda_r = 0.018;
  double lambda_v = 0.0105;
  double lambda_omega = 0.045;

  double delta_pelvis = deg_to_rad(10.0);
  double delta_spine = deg_to_rad(3.0);
  double delta_foot = deg_to_rad(12.0);
};

inline ValidationResult validate(const RewardWeights& w) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::pair<const char*, double> sigmas[] = {{"sigma_step", w.sigma_step},
                                                   {"sigma_vel", w.sigma_vel},
                                                   {"sigma_head", w.sigma_head},
                                                   {"sigma_sway", w.sigma_sway},
                                                   {"sigma_arm", w.sigma_arm}};
  for (const auto& [name, s] : sigmas)
    if (!(s > 0.0)) return OutOfRange(name, s, 0.0, inf);
  return detail::check("k_alive", w.k_alive, {0.0, 1.0});
}

/// Head stability inputs: tilt angle and linear/angular head accelerations.
struct HeadMotion {
  double tilt = 0.0;
  double linear_accel = 0.0;
  double angular_accel = 0.0;
};

/// Orientation of one body (pelvis, spine, foot) and its reference.
struct BodyOrientation {
  double current = 0.0;
  double reference = 0.0;
};

struct SwayInput {
  BodyOrientation pelvis;
  BodyOrientation spine;
  BodyOrientation foot;
};

struct GaitReward {
  double r_step = 1.0;
  double r_vel = 1.0;
  double r_head = 1.0;
  double r_sway = 1.0;
  double r_gait = 1.0;
};

namespace detail {
inline double gaussian(double err, double sigma) {
  const double z = err / sigma;
  return std::exp(-z * z);
}

/// 1 up to the threshold; above it decays on the excess toward k_alive.
inline double head_factor(double x, double threshold, const RewardWeights& w) {
  if (!(x > threshold)) return 1.0;
  return w.k_alive + (1.0 - w.k_alive) * gaussian(x - threshold, w.sigma_head);
}

inline double sway_factor(const BodyOrientation& b, double delta, double sigma) {
  const double dev = std::abs(b.current - b.reference);
  if (!(dev > delta)) return 1.0;
  return gaussian(dev - delta, sigma);
}
}  // namespace detail

inline GaitReward gait_reward(double foot_err, double vel_err, const HeadMotion& head,
                              const SwayInput& sway, const RewardWeights& w) {
  GaitReward r;
  r.r_step = detail::gaussian(foot_err, w.sigma_step);
  r.r_vel = detail::gaussian(vel_err, w.sigma_vel);
  r.r_head = detail::head_factor(std::abs(head.tilt), w.lambda_r, w) *
             detail::head_factor(std::abs(head.linear_accel), w.lambda_v, w) *
             detail::head_factor(std::abs(head.angular_accel), w.lambda_omega, w);
  r.r_sway = detail::sway_factor(sway.pelvis, w.delta_pelvis, w.sigma_sway) *
             detail::sway_factor(sway.spine, w.delta_spine, w.sigma_sway) *
             detail::sway_factor(sway.foot, w.delta_foot, w.sigma_sway);
  r.r_gait = r.r_step * r.r_vel * r.r_head * r.r_sway;
  return r;
}

/// exp(-sum_j (e_j / sigma)^2) over upper-arm joint errors.
inline double arm_reward(std::span<const double> joint_errors, double sigma_arm) {
  if (!(sigma_arm > 0.0)) throw OutOfRange("sigma_arm", sigma_arm, 0.0, std::numeric_limits<double>::infinity());
  double s = 0.0;
  for (double e : joint_errors) s += (e / sigma_arm) * (e / sigma_arm);
  return std::exp(-s);
}

inline double energy_reward(double mee_rate_value, double k_energy) {
  return 1.0 - k_energy * mee_rate_value;
}

enum class HeiVariant { resistance_min, assist_max, none };

/// Interaction reward on the per-side exoskeleton powers.
/// With kappa = 0 there is no exoskeleton power: resistance_min gives 1, assist_max gives 0.
inline double hei_reward(double p_left, double p_right, double kappa, HeiVariant variant) {
  switch (variant) {
    case HeiVariant::resistance_min:
      if (kappa == 0.0) return 1.0;
      return 1.0 + (std::min(0.0, p_left) + std::min(0.0, p_right)) / kappa;
    case HeiVariant::assist_max:
      if (kappa == 0.0) return 0.0;
      return (std::max(0.0, p_left) + std::max(0.0, p_right)) / kappa;
    case HeiVariant::none: return 0.0;
  }
  return 0.0;
}

struct RewardParts {
  double r_gait = 0.0;
  double r_arm = 0.0;
  double r_energy = 0.0;
  double r_hei = 0.0;
};

inline double total_reward(const RewardParts& p, const RewardWeights& w) {
  return w.w_gait * p.r_gait + w.w_arm * p.r_arm + w.w_energy * p.r_energy + w.w_hei * p.r_hei;
}

struct RewardBreakdown {
  double r_step, r_vel, r_head, r_sway, r_gait, r_arm, r_energy, r_hei, r_total;
};

/// Evaluates every term and the weighted total in one pass.
inline RewardBreakdown evaluate_rewards(double foot_err, double vel_err, const HeadMotion& head,
                                        const SwayInput& sway, std::span<const double> arm_errs,
                                        double mee_rate_value, double p_left, double p_right,
                                        double kappa, HeiVariant variant,
                                        const RewardWeights& w) {
  require_valid(w);
  const GaitReward g = gait_reward(foot_err, vel_err, head, sway, w);
  const RewardParts parts{g.r_gait, arm_reward(arm_errs, w.sigma_arm),
                          energy_reward(mee_rate_value, w.k_energy),
                          hei_reward(p_left, p_right, kappa, variant)};
  return {g.r_step,     g.r_vel,         g.r_head,     g.r_sway,
          g.r_gait,     parts.r_arm,     parts.r_energy, parts.r_hei,
          total_reward(parts, w)};
}

}  // namespace exoplore
