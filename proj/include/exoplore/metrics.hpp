// Similarity between a simulated and a reference time series.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "exoplore/domain.hpp"

namespace exoplore {

class ZeroRange : public Error {
 public:
  ZeroRange() : Error("reference series has zero range") {}
};

class ZeroVariance : public Error {
 public:
  ZeroVariance() : Error("zero variance") {}
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("series lengths differ: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

namespace detail {
inline void require_series(std::span<const double> s) {
  if (s.empty()) throw Error("empty series");
  for (double v : s)
    if (!std::isfinite(v)) throw Error("non-finite series value");
}

inline double range_of(std::span<const double> s) {
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  return *hi - *lo;
}
}  // namespace detail

/// RMSE divided by the range of the reference series.
inline double nrmse(std::span<const double> sim, std::span<const double> ref) {
  detail::require_series(sim);
  detail::require_series(ref);
  if (sim.size() != ref.size()) throw LengthMismatch(sim.size(), ref.size());
  const double range = detail::range_of(ref);
  if (!(range > 0.0)) throw ZeroRange();
  double sq = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) sq += (sim[i] - ref[i]) * (sim[i] - ref[i]);
  return std::sqrt(sq / static_cast<double>(sim.size())) / range;
}

inline double pearson_r(std::span<const double> sim, std::span<const double> ref) {
  detail::require_series(sim);
  detail::require_series(ref);
  if (sim.size() != ref.size()) throw LengthMismatch(sim.size(), ref.size());
  if (sim.size() < 2) throw ZeroVariance();
  const double n = static_cast<double>(sim.size());
  double ms = 0.0, mr = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    ms += sim[i];
    mr += ref[i];
  }
  ms /= n;
  mr /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double a = sim[i] - ms, b = ref[i] - mr;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ZeroVariance();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct DtwResult {
  double distance = 0.0;       // accumulated |a - b| along the optimal path
  std::size_t path_length = 0;  // number of cells on the optimal path
};

/// Unit-step dynamic time warping with full boundary conditions. Among equal-cost
/// paths the shortest is kept, then the one preferring diagonal, then vertical moves.
inline DtwResult dtw(std::span<const double> a, std::span<const double> b) {
  detail::require_series(a);
  detail::require_series(b);
  const std::size_t n = a.size(), m = b.size();
  struct Cell {
    double cost;
    std::size_t len;
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<Cell> dp((n + 1) * (m + 1), Cell{inf, 0});
  auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (m + 1) + j]; };
  at(0, 0) = {0.0, 0};
  auto better = [](const Cell& x, const Cell& y) {
    return x.cost < y.cost || (x.cost == y.cost && x.len < y.len);
  };
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      Cell best = at(i - 1, j - 1);
      if (better(at(i - 1, j), best)) best = at(i - 1, j);
      if (better(at(i, j - 1), best)) best = at(i, j - 1);
      at(i, j) = {best.cost + std::abs(a[i - 1] - b[j - 1]), best.len + 1};
    }
  return {at(n, m).cost, at(n, m).len};
}

/// DTW distance over (reference range x optimal path length).
inline double ndtw(std::span<const double> sim, std::span<const double> ref) {
  detail::require_series(ref);
  const double range = detail::range_of(ref);
  if (!(range > 0.0)) throw ZeroRange();
  const DtwResult r = dtw(sim, ref);
  return r.distance / (range * static_cast<double>(r.path_length));
}

/// Linear interpolation of `s` onto `length` evenly spaced points spanning the same extent.
inline std::vector<double> resample_linear(std::span<const double> s, std::size_t length) {
  detail::require_series(s);
  if (length == 0) throw Error("resample length must be positive");
  std::vector<double> out(length);
  if (length == 1 || s.size() == 1) {
    std::fill(out.begin(), out.end(), s.front());
    if (length == 1) out[0] = s.front();
    return out;
  }
  const double scale = static_cast<double>(s.size() - 1) / static_cast<double>(length - 1);
  for (std::size_t k = 0; k < length; ++k) {
    const double pos = static_cast<double>(k) * scale;
    const auto i = std::min(static_cast<std::size_t>(pos), s.size() - 2);
    const double w = pos - static_cast<double>(i);
    out[k] = s[i] + w * (s[i + 1] - s[i]);
  }
  return out;
}

}  // namespace exoplore
