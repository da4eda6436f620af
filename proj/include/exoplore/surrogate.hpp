// Design-of-experiments sampling and an MLP surrogate trained with a robust
// loss, an input-gradient penalty and weight regularization.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "exoplore/domain.hpp"

namespace exoplore {

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(int epoch, double value)
      : Error("non-finite training loss " + std::to_string(value) + " at epoch " +
              std::to_string(epoch)) {}
};

// ---------------------------------------------------------------------------
// sampling

/// N x d Latin hypercube: each dimension's N equal-width bins hold exactly one point.
/// A zero-width interval pins its coordinate to the interval's value.
inline Eigen::MatrixXd lhs_sample(const std::vector<Interval>& box, std::size_t n,
                                  std::uint64_t seed) {
  if (n == 0) throw Error("lhs_sample: N must be at least 1");
  for (const auto& iv : box)
    if (!(iv.hi >= iv.lo)) throw Error("lhs_sample: invalid interval");
  const auto d = box.size();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> perm(n);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < d; ++k) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Interval iv = box[k];
    if (iv.width() == 0.0) {
      pts.col(static_cast<Eigen::Index>(k)).setConstant(iv.lo);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p = static_cast<double>(perm[i]);
      double v = iv.lo + iv.width() * ((p + unit(rng)) / nd);
      // Keep round-off from pushing a point across its bin edge.
      const double bin = std::floor((v - iv.lo) / iv.width() * nd);
      if (bin != p || v >= iv.hi) v = iv.lo + iv.width() * ((p + 0.5) / nd);
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return pts;
}

/// Cartesian product of inclusive linspaces; the last dimension varies fastest.
inline Eigen::MatrixXd uniform_grid(const std::vector<Interval>& box,
                                    const std::vector<std::size_t>& counts) {
  if (box.size() != counts.size()) throw DimensionMismatch("uniform_grid", box.size(), counts.size());
  std::size_t total = 1;
  for (auto c : counts) {
    if (c == 0) throw Error("uniform_grid: counts must be at least 1");
    total *= c;
  }
  const auto d = box.size();
  Eigen::MatrixXd pts(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
  for (std::size_t row = 0; row < total; ++row) {
    std::size_t rem = row;
    for (std::size_t k = d; k-- > 0;) {
      const std::size_t idx = rem % counts[k];
      rem /= counts[k];
      const double v = counts[k] == 1
                           ? box[k].lo
                           : box[k].lo + box[k].width() * static_cast<double>(idx) /
                                             static_cast<double>(counts[k] - 1);
      pts(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// network

enum class Activation { tanh, identity };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::tanh;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return layers.front().inputs(); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }
};

namespace detail {
inline void activate(Activation a, Eigen::MatrixXd& z) {
  if (a == Activation::tanh) z = z.array().tanh();
}
/// First and second derivative of the activation, given its output value.
inline Eigen::ArrayXXd activation_d1(Activation a, const Eigen::MatrixXd& out) {
  if (a == Activation::identity) return Eigen::ArrayXXd::Ones(out.rows(), out.cols());
  return 1.0 - out.array().square();
}
inline Eigen::ArrayXXd activation_d2(Activation a, const Eigen::MatrixXd& out) {
  if (a == Activation::identity) return Eigen::ArrayXXd::Zero(out.rows(), out.cols());
  return -2.0 * out.array() * (1.0 - out.array().square());
}
}  // namespace detail

/// Fully connected net with tanh hidden layers and a linear scalar output, Xavier-uniform init.
inline Mlp make_mlp(Eigen::Index input_dim, const std::vector<int>& hidden, std::uint64_t seed,
                    Activation hidden_activation = Activation::tanh) {
  std::mt19937_64 rng(seed);
  Mlp net;
  Eigen::Index in = input_dim;
  auto add = [&](Eigen::Index out, Activation act) {
    DenseLayer l;
    const double r = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-r, r);
    l.weight.resize(out, in);
    for (Eigen::Index i = 0; i < out; ++i)
      for (Eigen::Index j = 0; j < in; ++j) l.weight(i, j) = u(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.activation = act;
    net.layers.push_back(std::move(l));
    in = out;
  };
  for (int h : hidden) add(h, hidden_activation);
  add(1, Activation::identity);
  return net;
}

/// Batched forward pass. Columns of `x` are samples; returns a 1 x B row.
inline Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x;
  for (const auto& l : net.layers) {
    Eigen::MatrixXd z = (l.weight * a).colwise() + l.bias;
    detail::activate(l.activation, z);
    a = std::move(z);
  }
  return a;
}

/// Per-sample gradient of the scalar output with respect to the inputs (d x B).
inline Eigen::MatrixXd mlp_input_gradient(const Mlp& net, const Eigen::MatrixXd& x) {
  std::vector<Eigen::MatrixXd> outs;
  outs.reserve(net.layers.size());
  Eigen::MatrixXd a = x;
  for (const auto& l : net.layers) {
    Eigen::MatrixXd z = (l.weight * a).colwise() + l.bias;
    detail::activate(l.activation, z);
    outs.push_back(z);
    a = std::move(z);
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Ones(1, x.cols());
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    const Eigen::MatrixXd e = (g.array() * detail::activation_d1(l.activation, outs[k])).matrix();
    g = l.weight.transpose() * e;
  }
  return g;
}

// ---------------------------------------------------------------------------
// surrogate = net + normalization

enum class RegressionLoss { huber, squared };
enum class PenaltyMode { analytic, finite_difference };
enum class TrainOptimizer { adam, sgd_momentum };

struct SurrogateConfig {
  std::vector<int> hidden{256, 256};
  int epochs = 10000;
  double lr_init = 0.1;
  double lr_end = 5e-4;
  double huber_delta = 1.0;
  double lambda_grad = 5e-2;
  double lambda_l1 = 5e-4;
  double lambda_l2 = 5e-4;
  int batch_size = 1024;
  RegressionLoss loss = RegressionLoss::huber;
  PenaltyMode penalty_mode = PenaltyMode::analytic;
  TrainOptimizer optimizer = TrainOptimizer::sgd_momentum;
  double momentum = 0.9;
  double fd_step = 1e-4;  // input perturbation for the finite-difference penalty
};

struct Normalization {
  std::vector<Interval> x_bounds;  // inputs mapped to [0, 1] by these
  double y_mean = 0.0;
  double y_std = 1.0;
};

struct SurrogateNet {
  Mlp mlp;
  Normalization norm;
  SurrogateConfig config;
  std::uint64_t seed = 0;
  double final_loss = 0.0;

  Eigen::Index input_dim() const { return mlp.input_dim(); }
};

/// Maps physical inputs (rows) to unit-box columns.
inline Eigen::MatrixXd normalize_inputs(const Normalization& n, const Eigen::MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != n.x_bounds.size())
    throw DimensionMismatch("normalize_inputs", n.x_bounds.size(),
                            static_cast<std::size_t>(rows.cols()));
  Eigen::MatrixXd cols(rows.cols(), rows.rows());
  for (Eigen::Index k = 0; k < rows.cols(); ++k) {
    const Interval iv = n.x_bounds[static_cast<std::size_t>(k)];
    if (iv.width() > 0.0)
      cols.row(k) = ((rows.col(k).array() - iv.lo) / iv.width()).matrix().transpose();
    else
      cols.row(k).setZero();
  }
  return cols;
}

/// Prediction on unit-box inputs, de-standardized.
inline double forward(const SurrogateNet& net, const Eigen::VectorXd& x01) {
  if (x01.size() != net.input_dim())
    throw DimensionMismatch("forward", static_cast<std::size_t>(net.input_dim()),
                            static_cast<std::size_t>(x01.size()));
  return net.norm.y_mean + net.norm.y_std * mlp_forward(net.mlp, x01)(0, 0);
}

/// Gradient of the de-standardized prediction with respect to unit-box inputs.
inline Eigen::VectorXd input_gradient(const SurrogateNet& net, const Eigen::VectorXd& x01) {
  if (x01.size() != net.input_dim())
    throw DimensionMismatch("input_gradient", static_cast<std::size_t>(net.input_dim()),
                            static_cast<std::size_t>(x01.size()));
  return net.norm.y_std * mlp_input_gradient(net.mlp, x01).col(0);
}

/// Batched prediction on physical inputs (one sample per row).
inline Eigen::VectorXd predict(const SurrogateNet& net, const Eigen::MatrixXd& rows) {
  const Eigen::MatrixXd out = mlp_forward(net.mlp, normalize_inputs(net.norm, rows));
  return (net.norm.y_mean + net.norm.y_std * out.row(0).array()).matrix().transpose();
}

inline double huber(double r, double delta) {
  if (!(delta > 0.0)) throw OutOfRange("huber_delta", delta, 0.0, 1e308);
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

inline double huber_derivative(double r, double delta) {
  return std::abs(r) <= delta ? r : (r > 0.0 ? delta : -delta);
}

// ---------------------------------------------------------------------------
// loss and parameter gradient

struct LossTerms {
  double fit = 0.0;
  double penalty = 0.0;
  double regularization = 0.0;
  double total() const { return fit + penalty + regularization; }
};

struct ParamGrad {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  explicit ParamGrad(const Mlp& net) {
    for (const auto& l : net.layers) {
      weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
      bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
  }
};

namespace detail {
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   // a_{l-1}
  std::vector<Eigen::MatrixXd> outputs;  // a_l
};

inline ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& x) {
  ForwardCache c;
  Eigen::MatrixXd a = x;
  for (const auto& l : net.layers) {
    c.inputs.push_back(a);
    Eigen::MatrixXd z = (l.weight * a).colwise() + l.bias;
    activate(l.activation, z);
    c.outputs.push_back(z);
    a = c.outputs.back();
  }
  return c;
}

/// Standard reverse pass. `out_adj` is dLoss/d(output); `extra_z_adj[l]` adds to dLoss/dz_l.
inline void backprop(const Mlp& net, const ForwardCache& c, const Eigen::MatrixXd& out_adj,
                     const std::vector<Eigen::MatrixXd>* extra_z_adj, ParamGrad& grad) {
  Eigen::MatrixXd a_adj = out_adj;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const auto& l = net.layers[k];
    Eigen::MatrixXd z_adj = (a_adj.array() * activation_d1(l.activation, c.outputs[k])).matrix();
    if (extra_z_adj) z_adj += (*extra_z_adj)[k];
    grad.weight[k].noalias() += z_adj * c.inputs[k].transpose();
    grad.bias[k] += z_adj.rowwise().sum();
    if (k > 0) a_adj = l.weight.transpose() * z_adj;
  }
}

/// L1 and L2 penalties on weights (not biases), averaged over the weight count so
/// their strength does not grow with layer width.
inline void add_weight_regularization(const Mlp& net, const SurrogateConfig& cfg, LossTerms& loss,
                                      ParamGrad* grad) {
  double count = 0.0;
  for (const auto& l : net.layers) count += static_cast<double>(l.weight.size());
  const double l1 = cfg.lambda_l1 / count, l2 = cfg.lambda_l2 / count;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& w = net.layers[k].weight;
    loss.regularization += l1 * w.array().abs().sum() + l2 * w.squaredNorm();
    if (grad) grad->weight[k] += l1 * w.array().sign().matrix() + 2.0 * l2 * w;
  }
}
}  // namespace detail

/// Loss of one minibatch (unit-box inputs as columns, standardized targets) and,
/// when `grad` is given, its gradient with respect to every weight and bias.
inline LossTerms batch_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const SurrogateConfig& cfg, ParamGrad* grad) {
  const auto batch = x.cols();
  const double inv_b = 1.0 / static_cast<double>(batch);
  const std::size_t depth = net.layers.size();
  LossTerms loss;

  const detail::ForwardCache cache = detail::forward_cached(net, x);
  const Eigen::MatrixXd& pred = cache.outputs.back();
  Eigen::MatrixXd out_adj(1, batch);
  for (Eigen::Index i = 0; i < batch; ++i) {
    const double r = pred(0, i) - y[i];
    if (cfg.loss == RegressionLoss::huber) {
      loss.fit += huber(r, cfg.huber_delta) * inv_b;
      out_adj(0, i) = huber_derivative(r, cfg.huber_delta) * inv_b;
    } else {
      loss.fit += 0.5 * r * r * inv_b;
      out_adj(0, i) = r * inv_b;
    }
  }

  std::vector<Eigen::MatrixXd> z_extra;
  if (cfg.lambda_grad > 0.0 && cfg.penalty_mode == PenaltyMode::analytic) {
    // Input gradient: g_L = 1, e_l = g_l * s'_l, g_{l-1} = W_l^T e_l.
    std::vector<Eigen::ArrayXXd> d1(depth), d2(depth);
    std::vector<Eigen::MatrixXd> g(depth + 1), e(depth);
    for (std::size_t k = 0; k < depth; ++k) {
      d1[k] = detail::activation_d1(net.layers[k].activation, cache.outputs[k]);
      d2[k] = detail::activation_d2(net.layers[k].activation, cache.outputs[k]);
    }
    g[depth] = Eigen::MatrixXd::Ones(1, batch);
    for (std::size_t k = depth; k-- > 0;) {
      e[k] = (g[k + 1].array() * d1[k]).matrix();
      g[k] = net.layers[k].weight.transpose() * e[k];
    }
    loss.penalty = cfg.lambda_grad * g[0].squaredNorm() * inv_b;
    if (grad) {
      // Reverse through the input-gradient pass, layer 1 upward.
      z_extra.resize(depth);
      Eigen::MatrixXd g_adj = (2.0 * cfg.lambda_grad * inv_b) * g[0];
      for (std::size_t k = 0; k < depth; ++k) {
        const auto& w = net.layers[k].weight;
        grad->weight[k].noalias() += e[k] * g_adj.transpose();
        const Eigen::MatrixXd e_adj = w * g_adj;
        z_extra[k] = (e_adj.array() * g[k + 1].array() * d2[k]).matrix();
        g_adj = (e_adj.array() * d1[k]).matrix();
      }
    }
  } else if (cfg.lambda_grad > 0.0) {
    // Central differences along each input axis; the parameter gradient follows
    // by backpropagating through the perturbed forward passes.
    const double h = cfg.fd_step;
    const auto d = x.rows();
    std::vector<Eigen::MatrixXd> plus_x(static_cast<std::size_t>(d)), minus_x(static_cast<std::size_t>(d));
    std::vector<detail::ForwardCache> plus(static_cast<std::size_t>(d)), minus(static_cast<std::size_t>(d));
    Eigen::MatrixXd slope(d, batch);
    for (Eigen::Index k = 0; k < d; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      plus_x[ku] = x;
      minus_x[ku] = x;
      plus_x[ku].row(k).array() += h;
      minus_x[ku].row(k).array() -= h;
      plus[ku] = detail::forward_cached(net, plus_x[ku]);
      minus[ku] = detail::forward_cached(net, minus_x[ku]);
      slope.row(k) = (plus[ku].outputs.back() - minus[ku].outputs.back()) / (2.0 * h);
    }
    loss.penalty = cfg.lambda_grad * slope.squaredNorm() * inv_b;
    if (grad)
      for (Eigen::Index k = 0; k < d; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const Eigen::MatrixXd adj = (2.0 * cfg.lambda_grad * inv_b / (2.0 * h)) * slope.row(k);
        detail::backprop(net, plus[ku], adj, nullptr, *grad);
        detail::backprop(net, minus[ku], -adj, nullptr, *grad);
      }
  }

  if (grad) detail::backprop(net, cache, out_adj, z_extra.empty() ? nullptr : &z_extra, *grad);
  detail::add_weight_regularization(net, cfg, loss, grad);
  return loss;
}

// ---------------------------------------------------------------------------
// training

struct Dataset {
  Eigen::MatrixXd x;  // one sample per row, physical units
  Eigen::VectorXd y;
  std::vector<Interval> bounds;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
};

struct TrainResult {
  SurrogateNet net;
  std::vector<double> loss_curve;  // mean total loss per epoch
};

/// Cosine annealing from lr_init at epoch 0 to lr_end at the last epoch.
inline double cosine_lr(const SurrogateConfig& cfg, int epoch) {
  if (cfg.epochs <= 1) return cfg.lr_init;
  const double t = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
  return cfg.lr_end + 0.5 * (cfg.lr_init - cfg.lr_end) * (1.0 + std::cos(std::numbers::pi * t));
}

inline TrainResult train(const Dataset& data, const SurrogateConfig& cfg, std::uint64_t seed,
                         const std::function<void(int, double)>& on_epoch = {}) {
  const std::size_t n = data.size();
  if (n == 0) throw Error("train: dataset is empty");
  if (static_cast<std::size_t>(data.x.rows()) != n)
    throw DimensionMismatch("train rows", n, static_cast<std::size_t>(data.x.rows()));
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error("train: epochs and batch_size must be >= 1");

  TrainResult out;
  SurrogateNet& net = out.net;
  net.config = cfg;
  net.seed = seed;
  net.norm.x_bounds = data.bounds;
  net.norm.y_mean = data.y.mean();
  const double var = (data.y.array() - net.norm.y_mean).square().mean();
  net.norm.y_std = var > 0.0 ? std::sqrt(var) : 1.0;

  const Eigen::MatrixXd x01 = normalize_inputs(net.norm, data.x);
  const Eigen::VectorXd ys = (data.y.array() - net.norm.y_mean) / net.norm.y_std;

  std::mt19937_64 rng(seed);
  net.mlp = make_mlp(x01.rows(), cfg.hidden, rng());

  ParamGrad m1(net.mlp), m2(net.mlp);  // Adam moments or SGD velocity
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  out.loss_curve.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      xb.resize(x01.rows(), static_cast<Eigen::Index>(len));
      yb.resize(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        xb.col(static_cast<Eigen::Index>(i)) = x01.col(order[start + i]);
        yb[static_cast<Eigen::Index>(i)] = ys[order[start + i]];
      }
      ParamGrad g(net.mlp);
      const LossTerms lt = batch_loss(net.mlp, xb, yb, cfg, &g);
      if (!std::isfinite(lt.total())) throw NonFiniteLoss(epoch, lt.total());
      epoch_loss += lt.total() * static_cast<double>(len) / static_cast<double>(n);
      ++step;
      for (std::size_t k = 0; k < net.mlp.layers.size(); ++k) {
        auto& layer = net.mlp.layers[k];
        if (cfg.optimizer == TrainOptimizer::adam) {
          const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
          const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
          auto update = [&](auto& param, auto& mom, auto& sq, const auto& gr) {
            mom = beta1 * mom + (1.0 - beta1) * gr;
            sq = (beta2 * sq.array() + (1.0 - beta2) * gr.array().square()).matrix();
            param.array() -= lr * (mom.array() / c1) / ((sq.array() / c2).sqrt() + eps);
          };
          update(layer.weight, m1.weight[k], m2.weight[k], g.weight[k]);
          update(layer.bias, m1.bias[k], m2.bias[k], g.bias[k]);
        } else {
          m1.weight[k] = cfg.momentum * m1.weight[k] + g.weight[k];
          m1.bias[k] = cfg.momentum * m1.bias[k] + g.bias[k];
          layer.weight -= lr * m1.weight[k];
          layer.bias -= lr * m1.bias[k];
        }
      }
    }
    if (!std::isfinite(epoch_loss)) throw NonFiniteLoss(epoch, epoch_loss);
    out.loss_curve.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  net.final_loss = out.loss_curve.back();
  return out;
}

/// Mean Euclidean norm of the de-standardized input gradient over unit-box points (columns).
inline double mean_gradient_norm(const SurrogateNet& net, const Eigen::MatrixXd& x01) {
  const Eigen::MatrixXd g = mlp_input_gradient(net.mlp, x01);
  return net.norm.y_std * g.colwise().norm().mean();
}

}  // namespace exoplore
