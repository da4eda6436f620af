// Preferred-walking-speed evaluation, metabolic model calibration, control
// parameter optimization over a trained surrogate, the end-to-end pipeline and
// severity trend fitting.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "exoplore/domain.hpp"
#include "exoplore/exo_controller.hpp"
#include "exoplore/gait_generator.hpp"
#include "exoplore/parallel.hpp"
#include "exoplore/surrogate.hpp"

namespace exoplore {

class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

class DegenerateX : public Error {
 public:
  DegenerateX() : Error("all x values are equal; slope undefined") {}
};

// ---------------------------------------------------------------------------
// preferred walking speed

/// n_length x n_freq grid spanning the admissible step length and frequency ranges.
inline std::vector<GaitParams> pws_grid(std::size_t n_length = 12, std::size_t n_freq = 12) {
  const Eigen::MatrixXd pts =
      uniform_grid({bounds::step_length, bounds::step_frequency}, {n_length, n_freq});
  std::vector<GaitParams> grid;
  grid.reserve(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) grid.push_back({pts(i, 0), pts(i, 1)});
  return grid;
}

struct SpeedCost {
  double speed = 0.0;
  double cot = 0.0;
};

struct PwsResult {
  double pws = 0.0;
  std::vector<SpeedCost> cot_curve;  // lowest cost at each distinct speed, ascending speed
  std::vector<double> point_cot;     // mean cost per grid point, in grid order
  GaitParams argmin_gait;
};

/// Mean unassisted cost of transport over `rollouts` paired seeds.
inline double mean_unassisted_cot(const GaitGenerator& gen, const GaitParams& g,
                                  const PathologyProfile& p, std::size_t rollouts,
                                  std::uint64_t seed) {
  double sum = 0.0;
  for (std::size_t r = 0; r < rollouts; ++r) sum += gen(g, {0.0, 0.0}, p, derive_seed(seed, r)).cot;
  return sum / static_cast<double>(rollouts);
}

/// Argmin of mean unassisted cost over the grid; ties go to the lower speed, then grid order.
inline PwsResult eval_pws(const GaitGenerator& gen, const std::vector<GaitParams>& grid,
                          std::size_t rollouts_per_point, std::uint64_t seed,
                          const PathologyProfile& p = {}, unsigned threads = 0) {
  if (grid.empty()) throw Error("eval_pws: empty grid");
  if (rollouts_per_point == 0) throw Error("eval_pws: rollouts_per_point must be >= 1");
  for (const auto& g : grid) require_valid(g);

  PwsResult out;
  out.point_cot.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    out.point_cot[i] = mean_unassisted_cot(gen, grid[i], p, rollouts_per_point, seed);
  }, threads);

  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double ci = out.point_cot[i], cb = out.point_cot[best];
    if (ci < cb || (ci == cb && speed_of(grid[i]) < speed_of(grid[best]))) best = i;
  }
  out.argmin_gait = grid[best];
  out.pws = speed_of(grid[best]);

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return speed_of(grid[a]) < speed_of(grid[b]); });
  for (auto i : order) {
    const double v = speed_of(grid[i]);
    if (!out.cot_curve.empty() && out.cot_curve.back().speed == v)
      out.cot_curve.back().cot = std::min(out.cot_curve.back().cot, out.point_cot[i]);
    else
      out.cot_curve.push_back({v, out.point_cot[i]});
  }
  return out;
}

struct CalibrationRow {
  double alpha = 0.0;
  double beta = 0.0;
  double pws = 0.0;
  double error = 0.0;  // |v_real - pws|
};

struct CalibrationResult {
  double alpha_star = 0.0;
  double beta_star = 0.0;
  std::vector<CalibrationRow> table;
};

/// Builds one generator per (alpha, beta) candidate and keeps the one whose preferred
/// speed is closest to `v_real`. All candidates share rollout seeds; ties go to the first.
inline CalibrationResult calibrate_mee(const std::vector<std::pair<double, double>>& candidates,
                                       double v_real, const GeneratorConfig& cfg,
                                       const MEEParams& base, const std::vector<GaitParams>& grid,
                                       std::size_t rollouts_per_point, std::uint64_t seed,
                                       unsigned threads = 0) {
  if (candidates.empty()) throw Error("calibrate_mee: no candidates");
  CalibrationResult out;
  std::size_t best = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    MEEParams mee = base;
    mee.alpha = candidates[k].first;
    mee.beta = candidates[k].second;
    const GaitGenerator gen = train_generator(cfg, mee);
    const PwsResult pws = eval_pws(gen, grid, rollouts_per_point, seed, {}, threads);
    out.table.push_back({mee.alpha, mee.beta, pws.pws, std::abs(v_real - pws.pws)});
    if (out.table[k].error < out.table[best].error) best = k;
  }
  out.alpha_star = out.table[best].alpha;
  out.beta_star = out.table[best].beta;
  return out;
}

/// Unassisted cost-minimizing cadence at a fixed speed, scanning `n_freq` frequencies
/// for which the implied step length is admissible.
inline GaitParams preferred_gait(const GaitGenerator& gen, double speed, std::size_t n_freq = 65,
                                 std::size_t rollouts = 3, std::uint64_t seed = 0,
                                 unsigned threads = 0) {
  std::vector<GaitParams> candidates;
  for (std::size_t j = 0; j < n_freq; ++j) {
    const double f = bounds::step_frequency.lo +
                     bounds::step_frequency.width() * static_cast<double>(j) /
                         static_cast<double>(std::max<std::size_t>(1, n_freq - 1));
    const GaitParams g{speed / f, f};
    if (!validate(g)) candidates.push_back(g);
  }
  if (candidates.empty()) throw OutOfRange("speed", speed, bounds::step_length.lo * bounds::step_frequency.lo,
                     bounds::step_length.hi * bounds::step_frequency.hi);
  std::vector<double> cost(candidates.size());
  parallel_for(candidates.size(), [&](std::size_t i) {
    cost[i] = mean_unassisted_cot(gen, candidates[i], {}, rollouts, seed);
  }, threads);
  const auto best = std::min_element(cost.begin(), cost.end()) - cost.begin();
  return candidates[static_cast<std::size_t>(best)];
}

/// Preferred gait at each speed (km/h), in the given order.
inline std::vector<GaitParams> preferred_gaits(const GaitGenerator& gen,
                                               const std::vector<double>& speeds_kmh,
                                               std::uint64_t seed, unsigned threads = 0) {
  std::vector<GaitParams> out;
  for (double v : speeds_kmh) out.push_back(preferred_gait(gen, kmh_to_ms(v), 65, 3, seed, threads));
  return out;
}

// ---------------------------------------------------------------------------
// control optimization over the surrogate

struct ControlSolution {
  GaitParams gait;
  double kappa = 0.0;
  double delta_t = 0.0;
  double predicted_cot = 0.0;
};

struct OptimizationResult {
  std::vector<ControlSolution> per_speed;  // ascending speed
  double objective = 0.0;                  // non-smoothed
  double severity = 0.0;
  int iterations = 0;
  bool converged = false;
  int starts_tried = 0;
};

struct ControlBox {
  Interval kappa = bounds::gain_kappa;
  Interval delay = bounds::delay_dt;
};

struct OptimizerConfig {
  double lambda1 = 1e-3;
  double lambda2 = 1e-2;
  int starts = 16;
  int max_iters = 500;
  double smoothing = 1e-6;  // sqrt(x^2 + eps^2) stands in for |x| while solving
};

namespace detail {
/// Predictions and their (kappa, delta_t) partials at each gait, physical units.
inline void predict_controls(const SurrogateNet& net, const std::vector<GaitParams>& gaits,
                             const std::vector<double>& kappa, const std::vector<double>& delay,
                             double severity, Eigen::VectorXd& y, Eigen::VectorXd* dk,
                             Eigen::VectorXd* dd) {
  const auto m = static_cast<Eigen::Index>(gaits.size());
  Eigen::MatrixXd rows(m, 5);
  for (Eigen::Index n = 0; n < m; ++n) {
    const auto& g = gaits[static_cast<std::size_t>(n)];
    rows.row(n) << g.step_length, g.step_frequency, kappa[static_cast<std::size_t>(n)],
        delay[static_cast<std::size_t>(n)], severity;
  }
  const Eigen::MatrixXd x01 = normalize_inputs(net.norm, rows);
  y = (net.norm.y_mean + net.norm.y_std * mlp_forward(net.mlp, x01).row(0).array())
          .matrix()
          .transpose();
  if (!dk) return;
  const Eigen::MatrixXd g01 = mlp_input_gradient(net.mlp, x01);
  const double wk = net.norm.x_bounds[2].width(), wd = net.norm.x_bounds[3].width();
  *dk = wk > 0.0 ? Eigen::VectorXd(net.norm.y_std * g01.row(2).transpose() / wk)
                 : Eigen::VectorXd::Zero(m);
  *dd = wd > 0.0 ? Eigen::VectorXd(net.norm.y_std * g01.row(3).transpose() / wd)
                 : Eigen::VectorXd::Zero(m);
}

inline double smooth_abs(double x, double eps) { return std::sqrt(x * x + eps * eps); }
inline double smooth_abs_d(double x, double eps) { return x / smooth_abs(x, eps); }
}  // namespace detail

/// Sum of predicted costs plus the gain-magnitude and cross-speed variation penalties.
/// `gaits` must be in the order the cross-speed differences are taken.
inline double control_objective(const SurrogateNet& net, const std::vector<GaitParams>& gaits,
                                const std::vector<double>& kappa, const std::vector<double>& delay,
                                double severity, double lambda1, double lambda2) {
  Eigen::VectorXd y;
  detail::predict_controls(net, gaits, kappa, delay, severity, y, nullptr, nullptr);
  double j = y.sum();
  for (std::size_t n = 0; n < gaits.size(); ++n) j += lambda1 * std::abs(kappa[n]);
  for (std::size_t n = 0; n + 1 < gaits.size(); ++n)
    j += lambda2 * (std::abs(kappa[n + 1] - kappa[n]) + std::abs(delay[n + 1] - delay[n]));
  return j;
}

namespace detail {
struct ProjectedBfgsResult {
  Eigen::VectorXd z;
  int iterations = 0;
  bool converged = false;
};

/// Projected quasi-Newton on the unit box with Armijo backtracking along the projection arc.
template <class Fn>
ProjectedBfgsResult projected_bfgs(Fn&& fg, Eigen::VectorXd z, int max_iters) {
  const auto n = z.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g(n), g_new(n);
  double f = fg(z, g);
  ProjectedBfgsResult out;
  bool scaled = false;
  for (int it = 1; it <= max_iters; ++it) {
    out.iterations = it;
    Eigen::Array<bool, Eigen::Dynamic, 1> active(n);
    double pg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      active[i] = (z[i] <= 0.0 && g[i] > 0.0) || (z[i] >= 1.0 && g[i] < 0.0);
      if (!active[i]) pg = std::max(pg, std::abs(g[i]));
    }
    if (pg < 1e-9) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd gf = g;
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) gf[i] = 0.0;
    Eigen::VectorXd d = -(h * gf);
    for (Eigen::Index i = 0; i < n; ++i)
      if (active[i]) d[i] = 0.0;
    if (!(g.dot(d) < 0.0)) {
      h.setIdentity();
      d = -gf;
    }
    double step = 1.0, f_new = f;
    Eigen::VectorXd z_new = z;
    bool accepted = false;
    while (step > 1e-12) {
      z_new = (z + step * d).cwiseMax(0.0).cwiseMin(1.0);
      f_new = fg(z_new, g_new);
      if (f_new <= f + 1e-4 * g.dot(z_new - z)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;  // no further decrease at machine scale
      break;
    }
    const Eigen::VectorXd s = z_new - z, yv = g_new - g;
    z = z_new;
    const double f_old = f;
    f = f_new;
    g = g_new;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        h *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - rho * s * yv.transpose();
      h = v * h * v.transpose() + rho * s * s.transpose();
    }
    if (s.lpNorm<Eigen::Infinity>() < 1e-12 ||
        std::abs(f_old - f) <= 1e-15 * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
  }
  out.z = std::move(z);
  return out;
}
}  // namespace detail

/// Jointly chooses (kappa_n, delta_t_n) for every gait. Gaits are ordered by speed
/// for the cross-speed penalty; the result lists them in that order.
inline OptimizationResult optimize_controls(const SurrogateNet& net, std::vector<GaitParams> gaits,
                                            const OptimizerConfig& opt, const ControlBox& box,
                                            std::uint64_t seed, double severity = 0.0) {
  if (gaits.empty()) throw Error("optimize_controls: no gaits");
  if (opt.starts < 1) throw Error("optimize_controls: starts must be >= 1");
  if (net.input_dim() != 5) throw DimensionMismatch("optimize_controls net inputs", 5,
                                                    static_cast<std::size_t>(net.input_dim()));
  std::stable_sort(gaits.begin(), gaits.end(),
                   [](const GaitParams& a, const GaitParams& b) { return speed_of(a) < speed_of(b); });
  const std::size_t m = gaits.size();
  const double eps = opt.smoothing;

  auto unpack = [&](const Eigen::VectorXd& z, std::vector<double>& k, std::vector<double>& d) {
    k.resize(m);
    d.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      k[i] = box.kappa.lo + box.kappa.width() * z[static_cast<Eigen::Index>(2 * i)];
      d[i] = box.delay.lo + box.delay.width() * z[static_cast<Eigen::Index>(2 * i + 1)];
    }
  };

  auto smoothed = [&](const Eigen::VectorXd& z, Eigen::VectorXd& grad) {
    std::vector<double> k, d;
    unpack(z, k, d);
    Eigen::VectorXd y, dk, dd;
    detail::predict_controls(net, gaits, k, d, severity, y, &dk, &dd);
    double j = y.sum();
    std::vector<double> gk(dk.data(), dk.data() + m), gd(dd.data(), dd.data() + m);
    for (std::size_t i = 0; i < m; ++i) {
      j += opt.lambda1 * detail::smooth_abs(k[i], eps);
      gk[i] += opt.lambda1 * detail::smooth_abs_d(k[i], eps);
    }
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double a = k[i + 1] - k[i], b = d[i + 1] - d[i];
      j += opt.lambda2 * (detail::smooth_abs(a, eps) + detail::smooth_abs(b, eps));
      const double sa = opt.lambda2 * detail::smooth_abs_d(a, eps);
      const double sb = opt.lambda2 * detail::smooth_abs_d(b, eps);
      gk[i + 1] += sa;
      gk[i] -= sa;
      gd[i + 1] += sb;
      gd[i] -= sb;
    }
    for (std::size_t i = 0; i < m; ++i) {
      grad[static_cast<Eigen::Index>(2 * i)] = gk[i] * box.kappa.width();
      grad[static_cast<Eigen::Index>(2 * i + 1)] = gd[i] * box.delay.width();
    }
    return j;
  };

  std::vector<Interval> unit(2 * m, Interval{0.0, 1.0});
  const Eigen::MatrixXd starts = lhs_sample(unit, static_cast<std::size_t>(opt.starts), seed);

  OptimizationResult best;
  best.objective = std::numeric_limits<double>::infinity();
  int total_iters = 0;
  bool any_converged = false;
  for (int s = 0; s < opt.starts; ++s) {
    auto res = detail::projected_bfgs(smoothed, Eigen::VectorXd(starts.row(s).transpose()),
                                      opt.max_iters);
    total_iters += res.iterations;
    any_converged = any_converged || res.converged;
    std::vector<double> k, d;
    unpack(res.z, k, d);
    const double obj = control_objective(net, gaits, k, d, severity, opt.lambda1, opt.lambda2);
    if (obj < best.objective) {
      best.objective = obj;
      best.converged = res.converged;
      best.per_speed.clear();
      Eigen::VectorXd y;
      detail::predict_controls(net, gaits, k, d, severity, y, nullptr, nullptr);
      for (std::size_t i = 0; i < m; ++i) best.per_speed.push_back({gaits[i], k[i], d[i], y[i]});
    }
  }
  best.iterations = total_iters;
  best.starts_tried = opt.starts;
  best.severity = severity;
  if (!any_converged) best.converged = false;
  return best;
}

// ---------------------------------------------------------------------------
// dataset generation and the end-to-end pipeline

struct SampleSpace {
  Interval step_length = bounds::step_length;
  Interval step_frequency = bounds::step_frequency;
  Interval gain_kappa = bounds::gain_kappa;
  Interval delay_dt = bounds::delay_dt;
  Interval severity{0.0, 0.0};

  std::vector<Interval> as_vector() const {
    return {step_length, step_frequency, gain_kappa, delay_dt, severity};
  }
};

struct DatasetRow {
  double step_length = 0.0;
  double step_frequency = 0.0;
  double kappa = 0.0;
  double delta_t = 0.0;
  double severity = 0.0;
  PathologyKind pathology = PathologyKind::none;
  std::uint64_t seed = 0;
  double cot = 0.0;

  bool operator==(const DatasetRow&) const = default;
};

/// One seeded rollout per LHS point of the sample space.
inline std::vector<DatasetRow> generate_dataset(const GaitGenerator& gen, const SampleSpace& space,
                                                PathologyKind pathology, std::size_t n,
                                                std::uint64_t seed, unsigned threads = 0) {
  const Eigen::MatrixXd pts = lhs_sample(space.as_vector(), n, seed);
  std::vector<DatasetRow> rows(n);
  parallel_for(n, [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    DatasetRow& row = rows[i];
    row.step_length = pts(r, 0);
    row.step_frequency = pts(r, 1);
    row.kappa = pts(r, 2);
    row.delta_t = pts(r, 3);
    row.pathology = pathology;
    row.severity = PathologyProfile::make(pathology, pts(r, 4)).severity;
    row.seed = derive_seed(seed, i);
    row.cot = gen({row.step_length, row.step_frequency}, {row.kappa, row.delta_t},
                  {pathology, row.severity}, row.seed)
                  .cot;
  }, threads);
  return rows;
}

inline Dataset to_training_set(const std::vector<DatasetRow>& rows, const SampleSpace& space) {
  Dataset d;
  d.bounds = space.as_vector();
  d.x.resize(static_cast<Eigen::Index>(rows.size()), 5);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.x.row(r) << rows[i].step_length, rows[i].step_frequency, rows[i].kappa, rows[i].delta_t,
        rows[i].severity;
    d.y[r] = rows[i].cot;
  }
  return d;
}

struct PipelineConfig {
  GeneratorConfig generator = default_generator_config();
  MEEParams mee;
  PathologyKind pathology = PathologyKind::none;
  SampleSpace space;
  std::size_t samples = 20000;
  SurrogateConfig surrogate;
  OptimizerConfig optimizer;
  ControlBox box;
  std::vector<GaitParams> gaits;  // gaits to optimize for
  double severity = 0.0;          // severity the controls are optimized at
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct PipelineResult {
  std::vector<DatasetRow> dataset;
  TrainResult training;
  OptimizationResult optimization;
};

/// Sample, simulate, fit, optimize. Failures are reported with the stage that raised them.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult out;
  GaitGenerator gen;
  try {
    gen = train_generator(cfg.generator, cfg.mee);
  } catch (const std::exception& e) {
    throw StageError("generator", e.what());
  }
  Eigen::MatrixXd probe;
  try {
    if (cfg.samples == 0) throw Error("sample count must be at least 1");
    lhs_sample(cfg.space.as_vector(), 1, cfg.seed);
  } catch (const std::exception& e) {
    throw StageError("sampling", e.what());
  }
  try {
    out.dataset = generate_dataset(gen, cfg.space, cfg.pathology, cfg.samples, cfg.seed, cfg.threads);
  } catch (const std::exception& e) {
    throw StageError("rollout", e.what());
  }
  try {
    out.training = train(to_training_set(out.dataset, cfg.space), cfg.surrogate, derive_seed(cfg.seed, 0x7a11));
  } catch (const std::exception& e) {
    throw StageError("training", e.what());
  }
  try {
    out.optimization = optimize_controls(out.training.net, cfg.gaits, cfg.optimizer, cfg.box,
                                         derive_seed(cfg.seed, 0x0b7), cfg.severity);
  } catch (const std::exception& e) {
    throw StageError("optimization", e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// trend statistics

struct TrendFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of y on x; R^2 is the squared Pearson correlation (0 for constant y).
inline TrendFit severity_trend(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw DegenerateX();
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (!(sxx > 0.0)) throw DegenerateX();
  TrendFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 0.0;
  return fit;
}

/// Population standard deviation over mean.
inline double coefficient_of_variation(const std::vector<double>& v) {
  if (v.empty()) throw EmptySequence("coefficient_of_variation");
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size())) / m;
}

}  // namespace exoplore
