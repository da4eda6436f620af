// Parametric stochastic gait generator: sagittal hip kinematics that adapt to
// assistance, pendulum inverse dynamics at the hip, phase-profiled knee and
// ankle demand, proportional muscle recruitment and the rollout protocol.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "exoplore/domain.hpp"
#include "exoplore/exo_controller.hpp"
#include "exoplore/metabolics.hpp"

namespace exoplore {

enum class GeneratorMode { physiological, planted_bowl };

/// How one pathology perturbs the generator when severity = 1 (effects scale linearly).
struct PathologyModel {
  Joint weak_joint = Joint::ankle;
  double weakness_remaining = 1.0;  // capacity multiplier of the weak joint's muscles
  double hip_contracture = 0.0;     // rad added to the hip rest posture
  double ankle_contracture = 0.0;   // rad; raises ankle demand proportionally
  double hip_demand_gain = 0.0;     // fractional change of hip torque demand
  double activation_baseline = 0.0; // added to every hip activation
  bool assist_destabilizes = false; // jitter std scaled by (1 + s kappa / 21)
  double stabilization_gain = 0.0;  // extra activation per unit |cycle jitter|
  double burst_scale = 0.0;         // heavy-tailed per-cycle ankle collision torque, N m
};

inline std::array<PathologyModel, 6> default_pathology_models() {
  std::array<PathologyModel, 6> m{};
  auto& calcaneus = m[static_cast<int>(PathologyKind::calcaneus)];
  calcaneus.weak_joint = Joint::ankle;
  calcaneus.weakness_remaining = 0.6;
  calcaneus.hip_demand_gain = 0.5;
  calcaneus.activation_baseline = 0.02;

  auto& footdrop = m[static_cast<int>(PathologyKind::footdrop)];
  footdrop.weak_joint = Joint::ankle;
  footdrop.weakness_remaining = 0.5;
  footdrop.burst_scale = 20.0;

  auto& waddling = m[static_cast<int>(PathologyKind::waddling)];
  waddling.weak_joint = Joint::hip;
  waddling.weakness_remaining = 0.6;
  waddling.hip_demand_gain = -0.45;
  waddling.assist_destabilizes = true;
  waddling.stabilization_gain = 0.05;

  auto& equinus = m[static_cast<int>(PathologyKind::equinus)];
  equinus.ankle_contracture = 0.26;
  equinus.hip_demand_gain = -0.45;
  equinus.assist_destabilizes = true;
  equinus.stabilization_gain = 0.05;

  auto& crouch = m[static_cast<int>(PathologyKind::crouch)];
  crouch.weak_joint = Joint::knee;
  crouch.weakness_remaining = 0.6;
  crouch.hip_contracture = 0.17;
  crouch.hip_demand_gain = 0.5;
  crouch.activation_baseline = 0.02;
  return m;
}

/// Planted quadratic landscape used as an end-to-end optimization oracle.
struct PlantedBowl {
  double base = 3.0;
  double kappa_weight = 0.01;  // per N m^2
  double delay_weight = 16.0;  // per s^2
  double kappa_star = 10.0;
  double delay_star = 0.25;
  double noise_std = 0.0;
};

struct GeneratorConfig {
  GeneratorMode mode = GeneratorMode::physiological;

  double leg_length = 0.9;       // m
  double hip_offset = 0.0;       // rad, neutral hip posture
  double adaptation_gain = 11.0; // amplitude growth with kappa (delay)^2
  double cycle_jitter_std = 0.03;
  double measurement_noise_std = 0.005;  // rad, on sensed angles only

  // Swing-leg pendulum about the hip.
  double inertia = 1.2;    // kg m^2
  double damping = 3.5;    // N m s/rad
  double leg_mass = 10.0;  // kg
  double com_length = 0.39;  // m
  double gravity = 9.81;

  // Knee and ankle demand amplitudes at the reference cadence, N m.
  double knee_gain = 8.0;
  double ankle_gain = 150.0;
  double reference_frequency = 1.8;  // steps/s

  double activation_baseline = 0.0;

  // Exoskeleton sensing and control loop.
  double control_dt = 0.01;
  double cutoff_hz = 6.0;
  double sensor_sign = -1.0;  // the controller measures hip angles extension-positive

  int total_cycles = 15;
  int discarded_cycles = 5;

  PlantedBowl bowl;
  std::array<PathologyModel, 6> pathologies = default_pathology_models();
  MuscleSet muscles;
};

/// Two line muscles per anatomical group; flexor and extensor groups at each joint and side.
inline MuscleSet default_muscle_set() {
  MuscleSet set;
  struct MuscleDef {
    const char* name;
    Joint joint;
    double mass, capacity;
  };
  const MuscleDef defs[] = {{"hip_flexor", Joint::hip, 1.2, 250.0},
                        {"hip_extensor", Joint::hip, 1.6, 250.0},
                        {"knee_flexor", Joint::knee, 0.9, 50.0},
                        {"knee_extensor", Joint::knee, 1.4, 50.0},
                        {"ankle_plantarflexor", Joint::ankle, 1.1, 200.0},
                        {"ankle_dorsiflexor", Joint::ankle, 0.4, 100.0}};
  for (Side side : {Side::right, Side::left})
    for (const auto& s : defs) {
      std::vector<std::size_t> group;
      for (int line = 0; line < 2; ++line) {
        group.push_back(set.muscles.size());
        set.muscles.push_back({std::string(to_string(side)) + "_" + s.name + "_" + std::to_string(line),
                               s.mass, s.capacity, s.joint, side});
      }
      set.groups.push_back(std::move(group));
    }
  return set;
}

inline GeneratorConfig default_generator_config() {
  GeneratorConfig cfg;
  cfg.muscles = default_muscle_set();
  return cfg;
}

inline ValidationResult validate(const GeneratorConfig& cfg) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(cfg.leg_length > 0.0)) return OutOfRange("leg_length", cfg.leg_length, 0.0, inf);
  if (!(cfg.adaptation_gain >= 0.0))
    return OutOfRange("adaptation_gain", cfg.adaptation_gain, 0.0, inf);
  if (!(cfg.cycle_jitter_std >= 0.0))
    return OutOfRange("cycle_jitter_std", cfg.cycle_jitter_std, 0.0, inf);
  if (!(cfg.measurement_noise_std >= 0.0))
    return OutOfRange("measurement_noise_std", cfg.measurement_noise_std, 0.0, inf);
  if (!(cfg.bowl.noise_std >= 0.0)) return OutOfRange("bowl.noise_std", cfg.bowl.noise_std, 0.0, inf);
  if (!(cfg.inertia > 0.0)) return OutOfRange("inertia", cfg.inertia, 0.0, inf);
  if (!(cfg.damping >= 0.0)) return OutOfRange("damping", cfg.damping, 0.0, inf);
  if (!(cfg.control_dt > 0.0)) return OutOfRange("control_dt", cfg.control_dt, 0.0, inf);
  if (!(cfg.cutoff_hz > 0.0)) return OutOfRange("cutoff_hz", cfg.cutoff_hz, 0.0, inf);
  if (cfg.total_cycles <= cfg.discarded_cycles || cfg.discarded_cycles < 0)
    return OutOfRange("discarded_cycles", cfg.discarded_cycles, 0.0, cfg.total_cycles - 1.0);
  for (const auto& p : cfg.pathologies)
    if (!(p.weakness_remaining > 0.0 && p.weakness_remaining <= 1.0))
      return OutOfRange("weakness_remaining", p.weakness_remaining, 0.0, 1.0);
  return validate(cfg.muscles);
}

// ---------------------------------------------------------------------------
// kinematics and dynamics

/// Hip swing amplitude: geometric step angle, grown by assistance, perturbed per cycle.
inline double hip_amplitude(const GaitParams& g, const ExoControlParams& c,
                            const GeneratorConfig& cfg, double cycle_jitter) {
  const double geometric = std::asin(std::min(0.999, g.step_length / (2.0 * cfg.leg_length)));
  const double delay = c.delay_dt / bounds::delay_dt.hi;
  const double adaptation =
      1.0 + cfg.adaptation_gain * (c.gain_kappa / bounds::gain_kappa.hi) * delay * delay;
  return geometric * adaptation * (1.0 + cycle_jitter);
}

struct HipAngles {
  double right = 0.0;
  double left = 0.0;
};

/// Antiphase sinusoidal hip angles; one gait cycle (two steps) lasts 2 / f.
inline HipAngles hip_angle_profile(const GaitParams& g, const ExoControlParams& c,
                                   const GeneratorConfig& cfg, double t, double cycle_jitter) {
  const double a = hip_amplitude(g, c, cfg, cycle_jitter);
  const double phase = std::numbers::pi * g.step_frequency * t;
  return {cfg.hip_offset + a * std::sin(phase), cfg.hip_offset + a * std::sin(phase + std::numbers::pi)};
}

/// Pendulum inverse dynamics: I theta'' + c theta' + m g l sin(theta).
inline double torque_demand(double theta, double theta_dot, double theta_ddot,
                            const GeneratorConfig& cfg) {
  return cfg.inertia * theta_ddot + cfg.damping * theta_dot +
         cfg.leg_mass * cfg.gravity * cfg.com_length * std::sin(theta);
}

/// Smooth periodic bump centred at `mu` (von Mises shape, peak 1).
inline double phase_bump(double phase, double mu, double concentration) {
  return std::exp(concentration * (std::cos(phase - mu) - 1.0));
}

/// Knee demand over the gait cycle: stance extension then swing flexion.
inline double knee_demand(const GaitParams& g, const GeneratorConfig& cfg, double phase) {
  const double cadence = g.step_frequency / cfg.reference_frequency;
  const double stride = g.step_length / cfg.leg_length;
  return cfg.knee_gain * cadence * cadence * stride *
         (phase_bump(phase, 0.3, 4.0) - 0.6 * phase_bump(phase, 3.8, 4.0));
}

/// Ankle push-off demand, growing with the square of relative step length.
inline double ankle_demand(const GaitParams& g, const GeneratorConfig& cfg, double phase,
                           double contracture) {
  const double stride = g.step_length / cfg.leg_length;
  return cfg.ankle_gain * stride * stride * (1.0 + contracture) * phase_bump(phase, 2.4, 6.0);
}

/// Net torque demand at each joint and side, indexed [joint][side].
struct JointTorques {
  std::array<std::array<double, 2>, 3> value{};

  double& at(Joint j, Side s) { return value[static_cast<int>(j)][static_cast<int>(s)]; }
  double at(Joint j, Side s) const { return value[static_cast<int>(j)][static_cast<int>(s)]; }
};

inline double weakness_multiplier(const PathologyModel& m, double severity) {
  return 1.0 - severity * (1.0 - m.weakness_remaining);
}

/// Proportional recruitment: a = clamp(|tau_joint| / (capacity x weakness) + baseline, 0, 1).
/// Every line muscle spanning a joint is recruited by that joint's |tau|; baselines apply to hip groups.
inline std::vector<double> activations_from_torque(const JointTorques& tau, const MuscleSet& muscles,
                                                   const PathologyProfile& p,
                                                   const GeneratorConfig& cfg,
                                                   double extra_baseline = 0.0) {
  const PathologyModel& model = cfg.pathologies[static_cast<int>(p.kind)];
  const double weak = weakness_multiplier(model, p.severity);
  const double hip_baseline = cfg.activation_baseline + p.severity * model.activation_baseline;
  std::vector<double> a(muscles.size());
  for (std::size_t i = 0; i < muscles.size(); ++i) {
    const LineMuscle& m = muscles.muscles[i];
    double capacity = m.torque_capacity;
    if (p.kind != PathologyKind::none && m.joint == model.weak_joint) capacity *= weak;
    double v = std::abs(tau.at(m.joint, m.side)) / capacity + extra_baseline;
    if (m.joint == Joint::hip) v += hip_baseline;
    a[i] = std::clamp(v, 0.0, 1.0);
  }
  return a;
}

// ---------------------------------------------------------------------------
// rollout

struct GaitTrajectory {
  double timestep = 0.01;
  int cycles_kept = 10;
  std::vector<double> time;
  std::vector<double> theta_right, theta_left;
  std::vector<double> theta_dot_right, theta_dot_left;
  std::vector<ExoTorqueRecord> exo;
  std::vector<std::vector<double>> activations;
  std::vector<bool> controller_warm;

  std::size_t size() const { return time.size(); }
};

struct RolloutResult {
  GaitTrajectory trajectory;
  double mee_joules = 0.0;
  double distance = 0.0;
  double cot = 0.0;
  std::uint64_t seed = 0;
};

/// Quadratic landscape with optional Gaussian label noise.
inline double planted_bowl_cot(const ExoControlParams& c, const GaitParams& /*g*/,
                               const PlantedBowl& bowl, double noise_std, std::uint64_t seed) {
  const double dk = c.gain_kappa - bowl.kappa_star;
  const double dd = c.delay_dt - bowl.delay_star;
  double v = bowl.base + bowl.kappa_weight * dk * dk + bowl.delay_weight * dd * dd;
  if (noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise_std);
    v += n(rng);
  }
  return v;
}

inline double cycle_duration(const GaitParams& g) { return 2.0 / g.step_frequency; }

/// Number of control steps in the first `cycles` gait cycles.
inline long steps_in_cycles(const GaitParams& g, const GeneratorConfig& cfg, int cycles) {
  return std::lround(cycles * cycle_duration(g) / cfg.control_dt);
}

/// Simulates the full protocol and integrates metabolic cost over the kept cycles.
inline RolloutResult rollout(const GeneratorConfig& cfg, const GaitParams& g,
                             const ExoControlParams& c, const PathologyProfile& p,
                             const MEEParams& mee, std::uint64_t seed, bool keep_trajectory = true) {
  require_valid(g);
  require_valid(c);
  require_valid(p);
  require_valid(mee);

  RolloutResult out;
  out.seed = seed;
  const int kept_cycles = cfg.total_cycles - cfg.discarded_cycles;
  out.distance = 2.0 * kept_cycles * g.step_length;
  out.trajectory.timestep = cfg.control_dt;
  out.trajectory.cycles_kept = kept_cycles;

  if (cfg.mode == GeneratorMode::planted_bowl) {
    out.cot = planted_bowl_cot(c, g, cfg.bowl, cfg.bowl.noise_std, seed);
    out.mee_joules = out.cot * out.distance;
    return out;
  }

  const PathologyModel& model = cfg.pathologies[static_cast<int>(p.kind)];
  const double s = p.severity;
  const double kappa_frac = c.gain_kappa / bounds::gain_kappa.hi;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::student_t_distribution<double> heavy(3.0);

  // Per-cycle perturbations, drawn up front so the stream layout is fixed.
  const double jitter_std =
      cfg.cycle_jitter_std * (model.assist_destabilizes ? 1.0 + s * kappa_frac : 1.0);
  std::vector<double> jitter(static_cast<std::size_t>(cfg.total_cycles));
  std::vector<double> burst(static_cast<std::size_t>(cfg.total_cycles));
  for (int k = 0; k < cfg.total_cycles; ++k) {
    jitter[static_cast<std::size_t>(k)] = jitter_std * unit_normal(rng);
    burst[static_cast<std::size_t>(k)] = s * model.burst_scale * std::abs(heavy(rng));
  }

  const double rest = cfg.hip_offset + s * model.hip_contracture;
  const double hip_scale = 1.0 + s * model.hip_demand_gain;
  const double ankle_contracture = s * model.ankle_contracture;
  const double omega = std::numbers::pi * g.step_frequency;
  const double tc = cycle_duration(g);

  GeneratorConfig posture = cfg;
  posture.hip_offset = rest;

  ExoController controller(c, cfg.control_dt, cfg.cutoff_hz);
  EnergyAccumulator energy;

  const long first_kept = steps_in_cycles(g, cfg, cfg.discarded_cycles);
  const long total = first_kept + steps_in_cycles(g, cfg, kept_cycles);
  auto& tr = out.trajectory;
  if (keep_trajectory) {
    const auto n = static_cast<std::size_t>(total - first_kept);
    tr.time.reserve(n);
    tr.exo.reserve(n);
    tr.activations.reserve(n);
  }

  JointTorques tau;
  for (long k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) * cfg.control_dt;
    const auto cycle = static_cast<std::size_t>(
        std::min<long>(static_cast<long>(std::floor(t / tc)), cfg.total_cycles - 1));
    const double j = jitter[cycle];

    const HipAngles th = hip_angle_profile(g, c, posture, t, j);
    const double amp = hip_amplitude(g, c, cfg, j);
    const double swing_vel = amp * omega * std::cos(omega * t);
    const double swing_acc = -amp * omega * omega * std::sin(omega * t);
    const double vel[2] = {-swing_vel, swing_vel};  // [left, right]
    const double acc[2] = {-swing_acc, swing_acc};
    const double ang[2] = {th.left, th.right};

    double sensed_r = cfg.sensor_sign * th.right;
    double sensed_l = cfg.sensor_sign * th.left;
    if (cfg.measurement_noise_std > 0.0) {
      sensed_r += cfg.measurement_noise_std * unit_normal(rng);
      sensed_l += cfg.measurement_noise_std * unit_normal(rng);
    }
    const ControlTorque exo = controller.step(t, sensed_r, sensed_l);
    const double exo_side[2] = {exo.left, exo.right};

    for (int side = 0; side < 2; ++side) {
      const double demand = hip_scale * torque_demand(ang[side] - rest, vel[side], acc[side], cfg);
      tau.value[static_cast<int>(Joint::hip)][side] = compensate_torque(demand, exo_side[side]);
      const double phase = omega * t + (side == static_cast<int>(Side::left) ? std::numbers::pi : 0.0);
      tau.value[static_cast<int>(Joint::knee)][side] = knee_demand(g, cfg, phase);
      tau.value[static_cast<int>(Joint::ankle)][side] =
          ankle_demand(g, cfg, phase, ankle_contracture) +
          burst[cycle] * phase_bump(phase, 0.0, 12.0);
    }

    if (k < first_kept) continue;
    const double stabilization = s * model.stabilization_gain * std::abs(j);
    std::vector<double> a = activations_from_torque(tau, cfg.muscles, p, cfg, stabilization);
    energy.add(mee_rate(a, cfg.muscles, mee), cfg.control_dt);

    if (keep_trajectory) {
      tr.time.push_back(t);
      tr.theta_right.push_back(th.right);
      tr.theta_left.push_back(th.left);
      tr.theta_dot_right.push_back(vel[1]);
      tr.theta_dot_left.push_back(vel[0]);
      tr.exo.push_back(ExoTorqueRecord::make(exo.right, exo.left, vel[1], vel[0]));
      tr.controller_warm.push_back(exo.warm);
      tr.activations.push_back(std::move(a));
    }
  }

  out.mee_joules = energy.joules();
  out.cot = cot(out.mee_joules, out.distance);
  return out;
}

/// A generator conditioned on a metabolic model; construction stands in for training.
struct GaitGenerator {
  GeneratorConfig config;
  MEEParams mee;

  RolloutResult operator()(const GaitParams& g, const ExoControlParams& c,
                           const PathologyProfile& p, std::uint64_t seed,
                           bool keep_trajectory = false) const {
    return rollout(config, g, c, p, mee, seed, keep_trajectory);
  }
};

inline GaitGenerator train_generator(const GeneratorConfig& cfg, const MEEParams& mee) {
  require_valid(cfg);
  require_valid(mee);
  return {cfg, mee};
}

}  // namespace exoplore
