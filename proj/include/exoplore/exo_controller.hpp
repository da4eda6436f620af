// Delayed-output feedback hip assistance: tau = kappa * u(t - dt),
// u = sin(theta_r) - sin(theta_l) on low-pass filtered hip angles.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "exoplore/domain.hpp"

namespace exoplore {

class NonPositiveDt : public Error {
 public:
  explicit NonPositiveDt(double dt) : Error("time step must be positive, got " + std::to_string(dt)) {}
};

class EmptySequence : public Error {
 public:
  explicit EmptySequence(std::string_view what)
      : Error(std::string("empty sequence: ") + std::string(what)) {}
};

/// First-order IIR low-pass state for one channel.
struct FilterState {
  double filtered = 0.0;
  double cutoff_hz = 6.0;
};

/// Smoothing coefficient c = dt / (dt + 1 / (2 pi f_c)).
inline double lowpass_coefficient(double dt, double cutoff_hz) {
  return dt / (dt + 1.0 / (2.0 * std::numbers::pi * cutoff_hz));
}

/// y <- y + c (raw - y). Returns the updated output.
inline double lowpass_step(FilterState& state, double raw, double dt) {
  if (!(dt > 0.0)) throw NonPositiveDt(dt);
  state.filtered += lowpass_coefficient(dt, state.cutoff_hz) * (raw - state.filtered);
  return state.filtered;
}

/// Fixed-capacity ring of (time, u) samples with linear-interpolated lookback.
class DelayBuffer {
 public:
  struct Sample {
    double t;
    double u;
  };

  /// Sized so that any lookback up to `max_delay` succeeds once warm.
  explicit DelayBuffer(double control_dt = 0.01, double max_delay = 0.5)
      : dt_(control_dt),
        ring_(static_cast<std::size_t>(std::ceil(max_delay / control_dt)) + 3) {
    if (!(control_dt > 0.0)) throw NonPositiveDt(control_dt);
  }

  double control_dt() const noexcept { return dt_; }
  std::size_t capacity() const noexcept { return ring_.size(); }
  std::size_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  void clear() noexcept {
    head_ = 0;
    count_ = 0;
  }

  /// Appends a sample; timestamps must be strictly increasing.
  void push(double t, double u) {
    if (count_ > 0 && !(t > newest().t))
      throw Error("DelayBuffer: timestamps must be strictly increasing");
    ring_[head_] = {t, u};
    head_ = (head_ + 1) % ring_.size();
    if (count_ < ring_.size()) ++count_;
  }

  /// i = 0 is the oldest retained sample.
  const Sample& at(std::size_t i) const {
    const std::size_t start = (head_ + ring_.size() - count_) % ring_.size();
    return ring_[(start + i) % ring_.size()];
  }
  const Sample& oldest() const { return at(0); }
  const Sample& newest() const { return at(count_ - 1); }

  /// Value of u at time `tq`, interpolated linearly between the bracketing samples.
  /// Empty when `tq` precedes the retained history (cold buffer).
  std::optional<double> lookup(double tq) const {
    if (count_ == 0) return std::nullopt;
    const Sample& last = newest();
    if (tq >= last.t) return last.u;
    // Tolerate round-off on the uniform time grid.
    const double eps = 1e-9 * dt_;
    if (tq < oldest().t - eps) return std::nullopt;
    std::size_t hi = count_ - 1;
    while (hi > 0 && at(hi - 1).t > tq) --hi;
    if (hi == 0) return oldest().u;
    const Sample& a = at(hi - 1);
    const Sample& b = at(hi);
    if (tq == a.t) return a.u;
    const double w = (tq - a.t) / (b.t - a.t);
    return a.u + w * (b.u - a.u);
  }

 private:
  double dt_;
  std::vector<Sample> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

inline double control_signal(double theta_r, double theta_l) {
  return std::sin(theta_r) - std::sin(theta_l);
}

struct ControlTorque {
  double right = 0.0;
  double left = 0.0;
  bool warm = false;  // false: lookback preceded the buffer and torque was zeroed
};

/// tau_right = kappa u(t - dt), tau_left = -tau_right. Zero torque while cold.
inline ControlTorque control_torque(const ExoControlParams& c, const DelayBuffer& buf, double t) {
  const auto u = buf.lookup(t - c.delay_dt);
  if (!u) return {0.0, 0.0, false};
  const double tau = c.gain_kappa * *u;
  return {tau, -tau, true};
}

/// tau_MCN = tau_PD - tau_exo: the torque left for the muscles.
inline double compensate_torque(double tau_pd, double tau_exo) { return tau_pd - tau_exo; }

struct ExoTorqueRecord {
  double torque[2]{};            // [right, left], N m
  double power[2]{};             // W
  double angular_velocity[2]{};  // rad/s

  static ExoTorqueRecord make(double tau_r, double tau_l, double omega_r, double omega_l) {
    ExoTorqueRecord r;
    r.torque[0] = tau_r;
    r.torque[1] = tau_l;
    r.angular_velocity[0] = omega_r;
    r.angular_velocity[1] = omega_l;
    r.power[0] = tau_r * omega_r;
    r.power[1] = tau_l * omega_l;
    return r;
  }
};

struct PowerStats {
  double rms_moment = 0.0;
  double mean_assist_power = 0.0;
  double mean_resist_power = 0.0;
};

/// Statistics pooled over both sides and all samples.
inline PowerStats power_stats(std::span<const ExoTorqueRecord> records) {
  if (records.empty()) throw EmptySequence("power_stats");
  double sq = 0.0, pos = 0.0, neg = 0.0;
  for (const auto& r : records)
    for (int k = 0; k < 2; ++k) {
      sq += r.torque[k] * r.torque[k];
      pos += std::max(0.0, r.power[k]);
      neg += std::min(0.0, r.power[k]);
    }
  const double n = 2.0 * static_cast<double>(records.size());
  return {std::sqrt(sq / n), pos / n, neg / n};
}

/// Filter, signal history and control law for one rollout.
class ExoController {
 public:
  ExoController(ExoControlParams params, double control_dt = 0.01, double cutoff_hz = 6.0)
      : params_(params), dt_(control_dt), buffer_(control_dt, bounds::delay_dt.hi) {
    require_valid(params_);
    right_.cutoff_hz = cutoff_hz;
    left_.cutoff_hz = cutoff_hz;
  }

  const ExoControlParams& params() const noexcept { return params_; }
  const DelayBuffer& buffer() const noexcept { return buffer_; }

  /// Feeds the sensed hip angles at time t and returns the assist torques.
  /// The first call seeds the filters with the raw angles.
  ControlTorque step(double t, double raw_right, double raw_left) {
    if (buffer_.empty()) {
      right_.filtered = raw_right;
      left_.filtered = raw_left;
    } else {
      lowpass_step(right_, raw_right, dt_);
      lowpass_step(left_, raw_left, dt_);
    }
    buffer_.push(t, control_signal(right_.filtered, left_.filtered));
    return control_torque(params_, buffer_, t);
  }

 private:
  ExoControlParams params_;
  double dt_;
  FilterState right_;
  FilterState left_;
  DelayBuffer buffer_;
};

}  // namespace exoplore
