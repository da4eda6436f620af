// Metabolic energy expenditure, cost of transport and assistance benefit.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "exoplore/domain.hpp"

namespace exoplore {

class ZeroDistance : public Error {
 public:
  explicit ZeroDistance(double d) : Error("distance must be positive, got " + std::to_string(d)) {}
};

class NonPositiveBaseline : public Error {
 public:
  explicit NonPositiveBaseline(double c)
      : Error("unassisted cost must be positive, got " + std::to_string(c)) {}
};

class EmptyCurve : public Error {
 public:
  EmptyCurve() : Error("cost curve has no assisted (kappa > 0) entry") {}
};

/// basal + sum_i m_i^alpha a_i^beta, in model watts.
inline double mee_rate(std::span<const double> activations, const MuscleSet& muscles,
                       const MEEParams& p) {
  if (activations.size() != muscles.size())
    throw DimensionMismatch("mee_rate", muscles.size(), activations.size());
  double rate = p.basal_rate;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const double a = activations[i];
    if (a <= 0.0) continue;
    rate += std::pow(muscles.muscles[i].mass, p.alpha) * std::pow(a, p.beta);
  }
  return rate;
}

/// Rectangle-rule integrator of a metabolic rate.
class EnergyAccumulator {
 public:
  void add(double rate, double dt) {
    if (!(dt > 0.0)) throw Error("EnergyAccumulator: dt must be positive");
    joules_ += std::max(0.0, rate) * dt;
    elapsed_ += dt;
  }
  double joules() const noexcept { return joules_; }
  double elapsed() const noexcept { return elapsed_; }

 private:
  double joules_ = 0.0;
  double elapsed_ = 0.0;
};

inline double cot(double total_mee, double distance) {
  if (!(distance > 0.0)) throw ZeroDistance(distance);
  return total_mee / distance;
}

/// Fractional cost reduction of assisted versus unassisted walking.
inline double metabolic_reduction_rate(double cot_off, double cot_on) {
  if (!(cot_off > 0.0)) throw NonPositiveBaseline(cot_off);
  return (cot_off - cot_on) / cot_off;
}

using CotCurve = std::vector<std::pair<ExoControlParams, double>>;

/// cot_off minus the lowest cost among entries with kappa > 0.
inline double benefit(const CotCurve& curve, double cot_off) {
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& [c, v] : curve)
    if (c.gain_kappa > 0.0) {
      best = std::min(best, v);
      any = true;
    }
  if (!any) throw EmptyCurve();
  return cot_off - best;
}

}  // namespace exoplore
