#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "anomex/errors.hpp"
#include "anomex/seeding.hpp"
#include "json.hpp"

namespace anomex {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RowMatrixXd = RowMat<double>;

// Hidden units are restricted to smooth activations so the input gradient is
// defined everywhere along an integration path.
enum class Activation { Logistic, Tanh };

std::string_view to_string(Activation act);
Activation activation_from_string(std::string_view name);

template <typename Scalar>
struct BasicLayer {
  Mat<Scalar> weights;  // units x inputs
  Vec<Scalar> bias;
  Activation activation = Activation::Tanh;

  bool operator==(const BasicLayer& other) const {
    return activation == other.activation && weights.rows() == other.weights.rows() &&
           weights.cols() == other.weights.cols() && bias.size() == other.bias.size() &&
           weights == other.weights && bias == other.bias;
  }
};

namespace detail {

template <typename Derived>
auto activate(Activation act, const Eigen::ArrayBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  using Array = Eigen::Array<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  Array out;
  if (act == Activation::Logistic) {
    out = (Scalar(1) + (-z).exp()).inverse();
  } else {
    out = z.tanh();
  }
  return out;
}

// Derivative expressed through the activation output a = act(z).
template <typename Derived>
auto activation_slope(Activation act, const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  using Array = Eigen::Array<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  Array out;
  if (act == Activation::Logistic) {
    out = a * (Scalar(1) - a);
  } else {
    out = Scalar(1) - a.square();
  }
  return out;
}

template <typename Scalar>
Scalar softplus(Scalar z) {
  using std::exp;
  using std::log1p;
  using std::abs;
  return std::max(z, Scalar(0)) + log1p(exp(-abs(z)));
}

}  // namespace detail

// Dense feed-forward scorer F: R^D -> (0,1) ending in a single logistic unit.
template <typename Scalar_>
class BasicNetwork {
 public:
  using Scalar = Scalar_;
  using Layer = BasicLayer<Scalar>;
  using Vector = Vec<Scalar>;

  BasicNetwork(Eigen::Index dims, std::vector<Layer> layers, std::uint64_t seed = 0)
      : dims_(dims), layers_(std::move(layers)), seed_(seed) {
    validate();
  }

  Eigen::Index dims() const { return dims_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }

  // Score-function interface shared with other differentiable scorers.
  Scalar value(const Vector& x) const;
  Vector gradient(const Vector& x) const;

  template <typename To>
  BasicNetwork<To> cast() const {
    std::vector<BasicLayer<To>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) {
      out.push_back({l.weights.template cast<To>(), l.bias.template cast<To>(), l.activation});
    }
    return BasicNetwork<To>(dims_, std::move(out), seed_);
  }

  bool operator==(const BasicNetwork&) const = default;

 private:
  void validate() const {
    if (dims_ < 1) throw ShapeError("network input width must be positive");
    if (layers_.empty()) throw ShapeError("network needs at least one layer");
    Eigen::Index width = dims_;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.weights.cols() != width) {
        throw ShapeError("layer " + std::to_string(k) + " expects " +
                         std::to_string(l.weights.cols()) + " inputs but receives " +
                         std::to_string(width));
      }
      if (l.bias.size() != l.weights.rows()) {
        throw ShapeError("layer " + std::to_string(k) + " bias length does not match unit count");
      }
      if (!l.weights.allFinite() || !l.bias.allFinite()) {
        throw NumericError("layer " + std::to_string(k) + " has non-finite parameters");
      }
      width = l.weights.rows();
    }
    if (width != 1 || layers_.back().activation != Activation::Logistic) {
      throw ShapeError("network must end in a single logistic unit");
    }
  }

  Eigen::Index dims_;
  std::vector<Layer> layers_;
  std::uint64_t seed_;
};

using Network = BasicNetwork<double>;

template <typename Scalar, typename Derived>
void check_input(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != net.dims()) {
    throw ShapeError("input has width " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(net.dims()));
  }
  if (!x.allFinite()) throw InputError("input contains non-finite values");
}

template <typename Scalar, typename Derived>
Scalar forward(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  check_input(net, x);
  Vec<Scalar> a = x.template cast<Scalar>();
  for (const auto& layer : net.layers()) {
    Vec<Scalar> z = layer.weights * a + layer.bias;
    a = detail::activate(layer.activation, z.array()).matrix();
  }
  return a(0);
}

// Exact dF/dx by reverse-mode accumulation through the stored activations.
template <typename Scalar, typename Derived>
Vec<Scalar> input_gradient(const BasicNetwork<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
  check_input(net, x);
  const auto& layers = net.layers();
  std::vector<Vec<Scalar>> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(x.template cast<Scalar>());
  for (const auto& layer : layers) {
    Vec<Scalar> z = layer.weights * acts.back() + layer.bias;
    acts.push_back(detail::activate(layer.activation, z.array()).matrix());
  }
  Vec<Scalar> delta =
      detail::activation_slope(layers.back().activation, acts.back().array()).matrix();
  for (std::size_t k = layers.size(); k-- > 0;) {
    Vec<Scalar> upstream = layers[k].weights.transpose() * delta;
    if (k == 0) return upstream;
    delta = upstream.cwiseProduct(
        detail::activation_slope(layers[k - 1].activation, acts[k].array()).matrix());
  }
  return {};  // unreachable: at least one layer
}

template <typename Scalar>
Scalar BasicNetwork<Scalar>::value(const Vector& x) const {
  return forward(*this, x);
}

template <typename Scalar>
typename BasicNetwork<Scalar>::Vector BasicNetwork<Scalar>::gradient(const Vector& x) const {
  return input_gradient(*this, x);
}

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 60;
  int batch_size = 32;
  std::vector<int> hidden = {16, 8};
  Activation hidden_activation = Activation::Tanh;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

// Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases.
template <typename Scalar = double>
BasicNetwork<Scalar> initial_network(Eigen::Index dims, const TrainConfig& cfg) {
  validate(cfg);
  if (dims < 1) throw ShapeError("network input width must be positive");
  const std::uint64_t init_seed = derive_seed(cfg.seed, "network-init");
  std::mt19937_64 rng(init_seed);
  std::vector<BasicLayer<Scalar>> layers;
  Eigen::Index fan_in = dims;
  auto make_layer = [&](Eigen::Index units, Activation act) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    BasicLayer<Scalar> layer{Mat<Scalar>(units, fan_in), Vec<Scalar>::Zero(units), act};
    for (Eigen::Index r = 0; r < units; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = Scalar(dist(rng));
    }
    fan_in = units;
    return layer;
  };
  for (int units : cfg.hidden) layers.push_back(make_layer(units, cfg.hidden_activation));
  layers.push_back(make_layer(1, Activation::Logistic));
  return BasicNetwork<Scalar>(dims, std::move(layers), init_seed);
}

namespace detail {

// Pre-activation of the output unit for every row of `inputs`.
template <typename Scalar>
Vec<Scalar> output_logits(const BasicNetwork<Scalar>& net, const RowMat<Scalar>& inputs) {
  Mat<Scalar> a = inputs.transpose();
  const auto& layers = net.layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Mat<Scalar> z = layers[k].weights * a;
    z.colwise() += layers[k].bias;
    if (k + 1 == layers.size()) return z.row(0).transpose();
    a = activate(layers[k].activation, z.array()).matrix();
  }
  return {};
}

}  // namespace detail

// Mean binary cross-entropy, computed from logits so saturated outputs stay finite.
template <typename Scalar>
Scalar mean_cross_entropy(const BasicNetwork<Scalar>& net, const RowMat<Scalar>& inputs,
                          const Vec<Scalar>& targets) {
  if (inputs.cols() != net.dims()) throw ShapeError("training inputs do not match model width");
  if (inputs.rows() != targets.size()) throw ShapeError("inputs and targets differ in length");
  if (inputs.rows() == 0) return Scalar(0);
  const Vec<Scalar> z = detail::output_logits(net, inputs);
  Scalar total(0);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total += detail::softplus(z(i)) - targets(i) * z(i);
  }
  return total / Scalar(z.size());
}

// Plain mini-batch SGD on binary cross-entropy with seeded shuffling. When
// `epoch_losses` is given it receives the full-data mean loss after each epoch.
template <typename Scalar>
BasicNetwork<Scalar> train(const BasicNetwork<Scalar>& init, const RowMat<Scalar>& inputs,
                           const Vec<Scalar>& targets, const TrainConfig& cfg,
                           std::vector<Scalar>* epoch_losses = nullptr) {
  if (cfg.epochs < 0) throw TrainingError("epochs must be non-negative");
  if (!(cfg.learning_rate > 0) || !std::isfinite(cfg.learning_rate)) {
    throw TrainingError("learning rate must be finite and positive");
  }
  if (cfg.batch_size < 1) throw TrainingError("batch size must be positive");
  if (inputs.rows() == 0) throw TrainingError("training data is empty");
  if (inputs.cols() != init.dims()) throw ShapeError("training inputs do not match model width");
  if (inputs.rows() != targets.size()) throw ShapeError("inputs and targets differ in length");
  if (!inputs.allFinite()) throw InputError("training inputs contain non-finite values");
  bool has_pos = false;
  bool has_neg = false;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    if (targets(i) == Scalar(1)) {
      has_pos = true;
    } else if (targets(i) == Scalar(0)) {
      has_neg = true;
    } else {
      throw TrainingError("labels must be 0 or 1");
    }
  }
  if (!has_pos || !has_neg) throw TrainingError("training data must contain both labels");
  if (epoch_losses) epoch_losses->clear();
  if (cfg.epochs == 0) return init;

  std::vector<BasicLayer<Scalar>> layers = init.layers();
  const std::size_t depth = layers.size();
  const Scalar lr = Scalar(cfg.learning_rate);
  const Eigen::Index n = inputs.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(cfg.seed);

  std::vector<Mat<Scalar>> acts(depth + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Mat<Scalar>& x = acts[0];
      x.resize(init.dims(), b);
      Vec<Scalar> y(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const Eigen::Index row = order[static_cast<std::size_t>(start + j)];
        x.col(j) = inputs.row(row).transpose();
        y(j) = targets(row);
      }
      for (std::size_t k = 0; k < depth; ++k) {
        Mat<Scalar> z = layers[k].weights * acts[k];
        z.colwise() += layers[k].bias;
        acts[k + 1] = detail::activate(layers[k].activation, z.array()).matrix();
      }
      // d(BCE)/d(logit) = prediction - label for a logistic output.
      Mat<Scalar> dz = (acts[depth].row(0) - y.transpose()) / Scalar(b);
      for (std::size_t k = depth; k-- > 0;) {
        Mat<Scalar> grad_w = dz * acts[k].transpose();
        Vec<Scalar> grad_b = dz.rowwise().sum();
        if (k > 0) {
          Mat<Scalar> da = layers[k].weights.transpose() * dz;
          dz = da.cwiseProduct(
              detail::activation_slope(layers[k - 1].activation, acts[k].array()).matrix());
        }
        layers[k].weights -= lr * grad_w;
        layers[k].bias -= lr * grad_b;
      }
    }
    BasicNetwork<Scalar> snapshot(init.dims(), layers, init.seed());
    const Scalar loss = mean_cross_entropy(snapshot, inputs, targets);
    if (!std::isfinite(static_cast<double>(loss))) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch + 1));
    }
    if (epoch_losses) epoch_losses->push_back(loss);
  }
  return BasicNetwork<Scalar>(init.dims(), std::move(layers), init.seed());
}

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& doc);

}  // namespace anomex
