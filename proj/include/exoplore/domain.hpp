// Shared domain types, parameter bounds and validation.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace exoplore {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter fell outside its admissible interval.
class OutOfRange : public Error {
 public:
  OutOfRange(std::string field, double value, double lo, double hi)
      : Error(format(field, value, lo, hi)),
        field_(std::move(field)),
        value_(value),
        lo_(lo),
        hi_(hi) {}

  const std::string& field() const noexcept { return field_; }
  double value() const noexcept { return value_; }
  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

 private:
  static std::string format(const std::string& field, double value, double lo, double hi) {
    std::ostringstream os;
    os.precision(17);
    os << "out of range: " << field << " = " << value << " not in [" << lo << ", " << hi << "]";
    return os.str();
  }

  std::string field_;
  double value_;
  double lo_;
  double hi_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::string_view what, std::size_t expected, std::size_t got)
      : Error(std::string("dimension mismatch in ") + std::string(what) + ": expected " +
              std::to_string(expected) + ", got " + std::to_string(got)) {}
};

/// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  constexpr bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  constexpr double clamp(double x) const noexcept { return std::clamp(x, lo, hi); }
  constexpr double width() const noexcept { return hi - lo; }
};

// Simulation parameter ranges. Step frequency is in steps per second.
namespace bounds {
inline constexpr Interval step_length{0.134, 0.938};
inline constexpr Interval step_frequency{1.27, 2.55};
inline constexpr Interval gain_kappa{0.0, 21.0};
inline constexpr Interval delay_dt{0.0, 0.5};
inline constexpr Interval severity{0.0, 1.0};
}  // namespace bounds

struct GaitParams {
  double step_length = 0.6;     // m
  double step_frequency = 2.0;  // steps/s

  double walking_speed() const noexcept { return step_length * step_frequency; }
  bool operator==(const GaitParams&) const = default;
};

struct ExoControlParams {
  double gain_kappa = 0.0;  // N m
  double delay_dt = 0.0;    // s

  bool operator==(const ExoControlParams&) const = default;
};

enum class PathologyKind { none, calcaneus, footdrop, waddling, equinus, crouch };

inline constexpr std::array<PathologyKind, 6> all_pathologies{
    PathologyKind::none,     PathologyKind::calcaneus, PathologyKind::footdrop,
    PathologyKind::waddling, PathologyKind::equinus,   PathologyKind::crouch};

inline std::string_view to_string(PathologyKind k) {
  switch (k) {
    case PathologyKind::none: return "none";
    case PathologyKind::calcaneus: return "calcaneus";
    case PathologyKind::footdrop: return "footdrop";
    case PathologyKind::waddling: return "waddling";
    case PathologyKind::equinus: return "equinus";
    case PathologyKind::crouch: return "crouch";
  }
  return "none";
}

inline std::optional<PathologyKind> pathology_from_string(std::string_view s) {
  for (auto k : all_pathologies)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct PathologyProfile {
  PathologyKind kind = PathologyKind::none;
  double severity = 0.0;

  /// Builds a normalized profile: severity is clamped to [0, 1] and forced to 0 for `none`.
  static PathologyProfile make(PathologyKind kind, double severity) {
    if (kind == PathologyKind::none || std::isnan(severity)) return {kind, 0.0};
    return {kind, bounds::severity.clamp(severity)};
  }

  bool operator==(const PathologyProfile&) const = default;
};

struct MEEParams {
  double alpha = 1.5;
  double beta = 1.0;
  double basal_rate = 0.4;  // model watts

  bool operator==(const MEEParams&) const = default;
};

enum class Joint { hip, knee, ankle };
enum class Side { left, right };

inline std::string_view to_string(Joint j) {
  switch (j) {
    case Joint::hip: return "hip";
    case Joint::knee: return "knee";
    case Joint::ankle: return "ankle";
  }
  return "hip";
}

inline std::string_view to_string(Side s) { return s == Side::left ? "left" : "right"; }

/// One line muscle. Several line muscles make up an anatomical group.
struct LineMuscle {
  std::string name;
  double mass = 1.0;             // kg
  double torque_capacity = 1.0;  // N m at full activation
  Joint joint = Joint::hip;
  Side side = Side::right;
};

struct MuscleSet {
  std::vector<LineMuscle> muscles;
  /// Partition of muscle indices into anatomical groups.
  std::vector<std::vector<std::size_t>> groups;

  std::size_t size() const noexcept { return muscles.size(); }
};

// ---------------------------------------------------------------------------
// validation

using ValidationResult = std::optional<OutOfRange>;

namespace detail {
inline ValidationResult check(std::string_view field, double v, Interval iv) {
  if (!(v >= iv.lo && v <= iv.hi)) return OutOfRange(std::string(field), v, iv.lo, iv.hi);
  return std::nullopt;
}
}  // namespace detail

inline ValidationResult validate(const GaitParams& g) {
  if (auto e = detail::check("step_length", g.step_length, bounds::step_length)) return e;
  return detail::check("step_frequency", g.step_frequency, bounds::step_frequency);
}

inline ValidationResult validate(const ExoControlParams& c) {
  if (auto e = detail::check("gain_kappa", c.gain_kappa, bounds::gain_kappa)) return e;
  return detail::check("delay_dt", c.delay_dt, bounds::delay_dt);
}

inline ValidationResult validate(const PathologyProfile& p) {
  if (p.kind == PathologyKind::none) return detail::check("severity", p.severity, {0.0, 0.0});
  return detail::check("severity", p.severity, bounds::severity);
}

inline ValidationResult validate(const MEEParams& m) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(m.alpha > 0.0)) return OutOfRange("alpha", m.alpha, 0.0, inf);
  if (!(m.beta > 0.0)) return OutOfRange("beta", m.beta, 0.0, inf);
  return detail::check("basal_rate", m.basal_rate, {0.0, inf});
}

inline ValidationResult validate(const MuscleSet& ms) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& m : ms.muscles) {
    if (!(m.mass > 0.0)) return OutOfRange(m.name + ".mass", m.mass, 0.0, inf);
    if (!(m.torque_capacity > 0.0))
      return OutOfRange(m.name + ".torque_capacity", m.torque_capacity, 0.0, inf);
  }
  std::vector<int> seen(ms.muscles.size(), 0);
  for (const auto& g : ms.groups)
    for (auto i : g) {
      if (i >= seen.size())
        return OutOfRange("group_index", static_cast<double>(i), 0.0,
                          static_cast<double>(seen.size()) - 1.0);
      ++seen[i];
    }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != 1) return OutOfRange("group_cover[" + std::to_string(i) + "]", seen[i], 1, 1);
  return std::nullopt;
}

/// Throws the validation error, if any.
template <class T>
void require_valid(const T& value) {
  if (auto e = validate(value)) throw *e;
}

inline GaitParams clamp(const GaitParams& g) {
  return {bounds::step_length.clamp(g.step_length),
          bounds::step_frequency.clamp(g.step_frequency)};
}

inline ExoControlParams clamp(const ExoControlParams& c) {
  return {bounds::gain_kappa.clamp(c.gain_kappa), bounds::delay_dt.clamp(c.delay_dt)};
}

inline PathologyProfile clamp(const PathologyProfile& p) {
  return PathologyProfile::make(p.kind, p.severity);
}

inline double speed_of(const GaitParams& g) { return g.step_length * g.step_frequency; }

inline constexpr double kmh_to_ms(double kmh) { return kmh / 3.6; }

}  // namespace exoplore
