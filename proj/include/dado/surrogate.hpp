#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "datapool.hpp"
#include "error.hpp"
#include "random.hpp"

namespace dado {

struct MlpConfig {
  std::size_t input_dim = 28;
  std::vector<std::size_t> hidden{200, 100};
  std::size_t output_dim = 2;
  double negative_slope = 0.01;
  double dropout_rate = 0.1;

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw Error(ErrorKind::InvalidConfig, "input and output sizes must be positive");
    for (auto h : hidden)
      if (h == 0) throw Error(ErrorKind::InvalidConfig, "hidden layer sizes must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorKind::InvalidConfig, "dropout_rate must be in [0,1)");
  }
};

struct TrainConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 4;
  std::size_t patience = 10;
  std::size_t max_epochs = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be positive");
    if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, "batch_size must be at least 1");
    if (patience == 0) throw Error(ErrorKind::InvalidConfig, "patience must be at least 1");
    if (max_epochs == 0) throw Error(ErrorKind::InvalidConfig, "max_epochs must be at least 1");
  }
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// Fully-connected regressor: leakyReLU + inverted dropout on every hidden
/// layer, linear output. Inputs and outputs live in normalized space.
class Mlp {
 public:
  Mlp() = default;

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  Mlp(MlpConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    std::size_t fan_in = config_.input_dim;
    auto add = [&](std::size_t fan_out) {
      DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out))};
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      // Row-major fill order so the init stream does not depend on Eigen's storage order.
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = bound * (2.0 * uniform_unit(rng) - 1.0);
      layers_.push_back(std::move(layer));
      fan_in = fan_out;
    };
    for (auto h : config_.hidden) add(h);
    add(config_.output_dim);
  }

  const MlpConfig& config() const { return config_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Flat view: per layer, weights in row-major order then biases.
  double& parameter(std::size_t k) {
    for (auto& l : layers_) {
      const auto nw = static_cast<std::size_t>(l.weight.size());
      if (k < nw) return l.weight(static_cast<Eigen::Index>(k / l.weight.cols()), static_cast<Eigen::Index>(k % l.weight.cols()));
      k -= nw;
      const auto nb = static_cast<std::size_t>(l.bias.size());
      if (k < nb) return l.bias(static_cast<Eigen::Index>(k));
      k -= nb;
    }
    throw Error(ErrorKind::DimensionMismatch, "parameter index out of range");
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  /// Eval-mode forward over columns of `inputs` (input_dim x batch).
  Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const {
    check_inputs(inputs.rows());
    Eigen::MatrixXd a = inputs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::MatrixXd z = layers_[i].weight * a;
      z.colwise() += layers_[i].bias;
      if (i + 1 < layers_.size()) z = z.unaryExpr([s = config_.negative_slope](double v) { return v > 0.0 ? v : s * v; });
      a = std::move(z);
    }
    return a;
  }

  ObjectiveVector predict(std::span<const double> x) const {
    const Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
    check_inputs(col.size());
    Eigen::MatrixXd y = predict(Eigen::MatrixXd(col));
    return ObjectiveVector(y.data(), y.data() + y.size());
  }

  /// Train-mode forward: dropout masks are drawn from `rng`.
  ObjectiveVector forward_train(std::span<const double> x, Rng& rng) const {
    const Eigen::Map<const Eigen::VectorXd> col(x.data(), static_cast<Eigen::Index>(x.size()));
    check_inputs(col.size());
    Tape tape;
    Eigen::MatrixXd y = forward(Eigen::MatrixXd(col), &rng, tape);
    return ObjectiveVector(y.data(), y.data() + y.size());
  }

  /// Intermediate values kept for backpropagation.
  struct Tape {
    std::vector<Eigen::MatrixXd> activations;  // input of each layer
    std::vector<Eigen::MatrixXd> pre;          // hidden pre-activations
    std::vector<Eigen::MatrixXd> masks;        // scaled dropout masks (empty in eval mode)
  };

  /// Forward with an optional dropout rng (nullptr = eval mode), recording a tape.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs, Rng* dropout_rng, Tape& tape) const {
    check_inputs(inputs.rows());
    tape.activations.assign(1, inputs);
    tape.pre.clear();
    tape.masks.clear();
    const double p = config_.dropout_rate;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Eigen::MatrixXd z = layers_[i].weight * tape.activations.back();
      z.colwise() += layers_[i].bias;
      if (i + 1 == layers_.size()) return z;
      Eigen::MatrixXd a = z.unaryExpr([s = config_.negative_slope](double v) { return v > 0.0 ? v : s * v; });
      tape.pre.push_back(std::move(z));
      if (dropout_rng && p > 0.0) {
        Eigen::MatrixXd mask(a.rows(), a.cols());
        const double keep_scale = 1.0 / (1.0 - p);
        for (Eigen::Index c = 0; c < mask.cols(); ++c)
          for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = uniform_unit(*dropout_rng) < p ? 0.0 : keep_scale;
        a.array() *= mask.array();
        tape.masks.push_back(std::move(mask));
      }
      tape.activations.push_back(std::move(a));
    }
    return tape.activations.back();
  }

  /// Gradients of the mean squared error (averaged over batch and outputs)
  /// given a tape from `forward`. Returns the loss.
  double backward(const Tape& tape, const Eigen::MatrixXd& outputs, const Eigen::MatrixXd& targets,
                  std::vector<DenseLayer>& grads) const {
    const double count = static_cast<double>(outputs.size());
    Eigen::MatrixXd delta = outputs - targets;
    const double loss = delta.squaredNorm() / count;
    delta *= 2.0 / count;
    grads.resize(layers_.size());
    for (std::size_t i = layers_.size(); i-- > 0;) {
      grads[i].weight.noalias() = delta * tape.activations[i].transpose();
      grads[i].bias = delta.rowwise().sum();
      if (i == 0) break;
      Eigen::MatrixXd upstream = layers_[i].weight.transpose() * delta;
      if (!tape.masks.empty()) upstream.array() *= tape.masks[i - 1].array();
      const double s = config_.negative_slope;
      delta = upstream.binaryExpr(tape.pre[i - 1], [s](double g, double z) { return z > 0.0 ? g : s * g; });
    }
    return loss;
  }

 private:
  void check_inputs(Eigen::Index rows) const {
    if (static_cast<std::size_t>(rows) != config_.input_dim)
      throw Error(ErrorKind::DimensionMismatch, "input has " + std::to_string(rows) + " features, model expects " +
                                                    std::to_string(config_.input_dim));
  }

  MlpConfig config_;
  std::vector<DenseLayer> layers_;
};

inline Mlp init_model(const MlpConfig& config, std::uint64_t seed) { return Mlp(config, seed); }

/// Normalized inputs (input_dim x n) and targets (output_dim x n), one sample per column.
struct TrainingData {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }

  static TrainingData from_rows(std::span<const std::vector<double>> xs, std::span<const ObjectiveVector> ys) {
    if (xs.size() != ys.size()) throw Error(ErrorKind::SizeMismatch, "inputs and targets differ in length");
    if (xs.empty()) throw Error(ErrorKind::DegenerateInput, "training data is empty");
    TrainingData data{Eigen::MatrixXd(static_cast<Eigen::Index>(xs.front().size()), static_cast<Eigen::Index>(xs.size())),
                      Eigen::MatrixXd(static_cast<Eigen::Index>(ys.front().size()), static_cast<Eigen::Index>(ys.size()))};
    for (std::size_t n = 0; n < xs.size(); ++n) {
      if (static_cast<Eigen::Index>(xs[n].size()) != data.inputs.rows() ||
          static_cast<Eigen::Index>(ys[n].size()) != data.targets.rows())
        throw Error(ErrorKind::DimensionMismatch, "ragged training row " + std::to_string(n));
      for (std::size_t j = 0; j < xs[n].size(); ++j) data.inputs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = xs[n][j];
      for (std::size_t j = 0; j < ys[n].size(); ++j) data.targets(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = ys[n][j];
    }
    return data;
  }
};

inline double mse_loss(const Mlp& model, const TrainingData& data) {
  return (model.predict(data.inputs) - data.targets).squaredNorm() / static_cast<double>(data.targets.size());
}

struct TrainLog {
  std::vector<double> epoch_loss;
  std::size_t best_epoch = 0;
  std::size_t stopped_epoch = 0;
  bool hit_max_epochs = false;

  double best_loss() const { return epoch_loss.at(best_epoch); }
};

/// Stops once the monitored loss has not strictly decreased for `patience` epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when training should stop after this epoch.
  bool observe(double loss) {
    const std::size_t epoch = seen_++;
    if (epoch == 0 || loss < best_loss_) {
      best_loss_ = loss;
      best_epoch_ = epoch;
      improved_ = true;
    } else {
      improved_ = false;
    }
    return epoch - best_epoch_ >= patience_;
  }

  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t seen_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

struct TrainResult {
  Mlp model;
  TrainLog log;
};

/// Adam on shuffled mini-batches (last partial batch kept). The epoch loss is
/// the eval-mode MSE over the whole training set; the best epoch's weights
/// are returned.
inline TrainResult train(Mlp model, const TrainingData& data, const TrainConfig& cfg, Rng& shuffle_rng, Rng& dropout_rng) {
  cfg.validate();
  if (data.size() == 0) throw Error(ErrorKind::DegenerateInput, "training data is empty");
  if (static_cast<std::size_t>(data.inputs.rows()) != model.config().input_dim ||
      static_cast<std::size_t>(data.targets.rows()) != model.config().output_dim)
    throw Error(ErrorKind::DimensionMismatch, "training data does not match the model shape");

  auto& layers = model.layers();
  std::vector<DenseLayer> m1(layers.size()), m2(layers.size()), grads;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    m1[i] = {Eigen::MatrixXd::Zero(layers[i].weight.rows(), layers[i].weight.cols()), Eigen::VectorXd::Zero(layers[i].bias.size())};
    m2[i] = m1[i];
  }

  std::vector<Eigen::Index> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  TrainResult result{model, {}};
  EarlyStopping stopper(cfg.patience);
  Mlp::Tape tape;
  Eigen::MatrixXd xb, tb;
  std::size_t step = 0;
  const auto n = static_cast<Eigen::Index>(data.size());

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    for (Eigen::Index start = 0; start < n; start += static_cast<Eigen::Index>(cfg.batch_size)) {
      const Eigen::Index len = std::min<Eigen::Index>(static_cast<Eigen::Index>(cfg.batch_size), n - start);
      xb.resize(data.inputs.rows(), len);
      tb.resize(data.targets.rows(), len);
      for (Eigen::Index k = 0; k < len; ++k) {
        xb.col(k) = data.inputs.col(order[static_cast<std::size_t>(start + k)]);
        tb.col(k) = data.targets.col(order[static_cast<std::size_t>(start + k)]);
      }
      const Eigen::MatrixXd out = model.forward(xb, &dropout_rng, tape);
      model.backward(tape, out, tb, grads);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, step_size = cfg.learning_rate / c1;
      const double inv_sqrt_c2 = 1.0 / std::sqrt(c2), eps = cfg.adam_epsilon;
      auto adam = [&](auto& param, auto& first, auto& second, const auto& grad) {
        double* w = param.data();
        double* m = first.data();
        double* v = second.data();
        const double* g = grad.data();
        for (Eigen::Index k = 0, size = param.size(); k < size; ++k) {
          m[k] = b1 * m[k] + (1.0 - b1) * g[k];
          v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
          w[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_c2 + eps);
        }
      };
      for (std::size_t i = 0; i < layers.size(); ++i) {
        adam(layers[i].weight, m1[i].weight, m2[i].weight, grads[i].weight);
        adam(layers[i].bias, m1[i].bias, m2[i].bias, grads[i].bias);
      }
    }

    const double loss = mse_loss(model, data);
    if (!std::isfinite(loss) || !model.all_finite())
      throw Error(ErrorKind::NumericalDivergence, "non-finite training loss at epoch " + std::to_string(epoch));
    result.log.epoch_loss.push_back(loss);
    const bool stop = stopper.observe(loss);
    if (stopper.improved()) result.model = model;
    result.log.stopped_epoch = epoch;
    if (stop) break;
  }
  result.log.best_epoch = stopper.best_epoch();
  result.log.hit_max_epochs = result.log.epoch_loss.size() == cfg.max_epochs &&
                              result.log.stopped_epoch - result.log.best_epoch < cfg.patience;
  return result;
}

/// Single-stream variant: shuffles and dropout masks share `rng`.
inline TrainResult train(Mlp model, const TrainingData& data, const TrainConfig& cfg, Rng& rng) {
  return train(std::move(model), data, cfg, rng, rng);
}

enum class TargetSpace { Normalized, Raw };

/// Eval-mode predictions for drawn candidates, in normalized or raw target units.
inline std::vector<ObjectiveVector> predict_batch(const Mlp& model, std::span<const DesignCandidate> candidates,
                                                  const FeatureNormalizer& fnorm, const TargetNormalizer& tnorm,
                                                  TargetSpace space = TargetSpace::Normalized) {
  if (candidates.empty()) return {};
  const auto d = static_cast<Eigen::Index>(model.config().input_dim);
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    const auto scaled = fnorm.apply(candidates[n].params);
    if (static_cast<Eigen::Index>(scaled.size()) != d)
      throw Error(ErrorKind::DimensionMismatch, "candidate " + std::to_string(candidates[n].id) + " has wrong dimension");
    x.col(static_cast<Eigen::Index>(n)) = Eigen::Map<const Eigen::VectorXd>(scaled.data(), d);
  }
  const Eigen::MatrixXd y = model.predict(x);
  std::vector<ObjectiveVector> out(candidates.size());
  for (std::size_t n = 0; n < candidates.size(); ++n) {
    ObjectiveVector v(y.col(static_cast<Eigen::Index>(n)).data(), y.col(static_cast<Eigen::Index>(n)).data() + y.rows());
    out[n] = space == TargetSpace::Raw ? tnorm.invert(v) : std::move(v);
  }
  return out;
}

/// Analytic gradient of the single-sample MSE (dropout off), flattened in
/// `Mlp::parameter` order.
inline std::vector<double> loss_gradient(const Mlp& model, std::span<const double> x, std::span<const double> target) {
  const Eigen::MatrixXd xi = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::MatrixXd ti = Eigen::Map<const Eigen::VectorXd>(target.data(), static_cast<Eigen::Index>(target.size()));
  Mlp::Tape tape;
  const Eigen::MatrixXd out = model.forward(xi, nullptr, tape);
  std::vector<DenseLayer> grads;
  model.backward(tape, out, ti, grads);
  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  for (const auto& g : grads) {
    for (Eigen::Index r = 0; r < g.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < g.weight.cols(); ++c) flat.push_back(g.weight(r, c));
    for (Eigen::Index r = 0; r < g.bias.size(); ++r) flat.push_back(g.bias(r));
  }
  return flat;
}

/// Central finite differences of the single-sample MSE w.r.t. every parameter.
inline std::vector<double> numeric_gradient(const Mlp& model, std::span<const double> x, std::span<const double> target,
                                            double eps) {
  // Evaluated in long double: the loss difference of a 26k-parameter network
  // cancels to ~1e-10 in double, which swamps gradients near 1e-7.
  using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const auto& layers = model.layers();
  const std::size_t n_layers = layers.size();
  const long double slope = model.config().negative_slope;
  std::vector<Mat> w(n_layers);
  std::vector<Vec> b(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    w[l] = layers[l].weight.cast<long double>();
    b[l] = layers[l].bias.cast<long double>();
  }
  Vec t(static_cast<Eigen::Index>(target.size()));
  for (std::size_t j = 0; j < target.size(); ++j) t(static_cast<Eigen::Index>(j)) = target[j];

  // inputs[l] feeds layer l; pre[l] is its pre-activation
  std::vector<Vec> inputs(n_layers), pre(n_layers);
  inputs[0].resize(static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) inputs[0](static_cast<Eigen::Index>(j)) = x[j];
  auto activate = [&](Vec z) {
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (z(i) < 0) z(i) *= slope;
    return z;
  };
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = w[l] * inputs[l] + b[l];
    if (l + 1 < n_layers) inputs[l + 1] = activate(pre[l]);
  }
  // loss after shifting unit r of layer l's pre-activation by delta
  auto loss_from = [&](std::size_t l, Eigen::Index r, long double delta) {
    Vec z = pre[l];
    z(r) += delta;
    for (std::size_t k = l + 1; k < n_layers; ++k) z = w[k] * activate(z) + b[k];
    return (z - t).squaredNorm() / static_cast<long double>(t.size());
  };

  std::vector<double> flat;
  flat.reserve(model.parameter_count());
  const long double h = eps;
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (Eigen::Index r = 0; r < w[l].rows(); ++r)
      for (Eigen::Index c = 0; c < w[l].cols(); ++c) {
        const long double in = inputs[l](c);
        flat.push_back(static_cast<double>((loss_from(l, r, h * in) - loss_from(l, r, -h * in)) / (2 * h)));
      }
    for (Eigen::Index r = 0; r < b[l].size(); ++r)
      flat.push_back(static_cast<double>((loss_from(l, r, h) - loss_from(l, r, -h)) / (2 * h)));
  }
  return flat;
}

/// Relative error per component is |a - n| / max(|a|, |n|, floor); the floor
/// keeps round-off on vanishing gradients from dominating.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-6) {
  if (analytic.size() != numeric.size()) throw Error(ErrorKind::SizeMismatch, "gradient lengths differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / denom);
  }
  return worst;
}

/// Max relative error between backprop and central differences. `tamper`
/// may modify the analytic gradient before comparison.
inline double grad_check(const Mlp& model, std::span<const double> x, std::span<const double> target, double eps,
                         const std::function<void(std::vector<double>&)>& tamper = {}) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidConfig, "eps must be positive");
  auto analytic = loss_gradient(model, x, target);
  if (tamper) tamper(analytic);
  const auto numeric = numeric_gradient(model, x, target, eps);
  return max_relative_error(analytic, numeric);
}

}  // namespace dado
