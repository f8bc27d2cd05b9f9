#pragma once

// Dense actor-critic network: one tanh body, a final linear layer whose
// leading outputs are action logits and whose last output is the state value.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hfdrl/errors.hpp"
#include "hfdrl/random.hpp"

namespace hfdrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { Tanh, Identity };

struct LayerShape {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Weight matrix (out_dim x in_dim) and bias vector (out_dim).
struct LayerTensors {
  Matrix weights;
  Vector biases;

  LayerShape shape() const {
    return {static_cast<std::size_t>(weights.cols()), static_cast<std::size_t>(weights.rows())};
  }
};

struct DenseLayer : LayerTensors {
  Activation activation = Activation::Tanh;
};

inline void check_chain(const std::vector<LayerShape>& shapes) {
  if (shapes.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    if (shapes[k].in_dim == 0 || shapes[k].out_dim == 0)
      throw ShapeError("layer " + std::to_string(k) + " has a zero dimension");
    if (k + 1 < shapes.size() && shapes[k].out_dim != shapes[k + 1].in_dim)
      throw ShapeError("layer " + std::to_string(k) + " out_dim " + std::to_string(shapes[k].out_dim) +
                       " does not match layer " + std::to_string(k + 1) + " in_dim " +
                       std::to_string(shapes[k + 1].in_dim));
  }
}

struct ParamSet {
  std::vector<DenseLayer> layers;

  std::vector<LayerShape> shapes() const {
    std::vector<LayerShape> out;
    out.reserve(layers.size());
    for (const auto& l : layers) out.push_back(l.shape());
    return out;
  }

  std::size_t input_dim() const { return static_cast<std::size_t>(layers.front().weights.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers.back().weights.rows()); }
  std::size_t action_count() const { return output_dim() - 1; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
    return n;
  }

  /// Layer by layer: weights in row-major order, then biases.
  Vector flatten() const {
    Vector flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index pos = 0;
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat[pos++] = l.weights(r, c);
      for (Eigen::Index r = 0; r < l.biases.size(); ++r) flat[pos++] = l.biases[r];
    }
    return flat;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
    return true;
  }

  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      const auto& x = a.layers[k];
      const auto& y = b.layers[k];
      if (x.activation != y.activation || x.shape() != y.shape()) return false;
      if (x.weights != y.weights || x.biases != y.biases) return false;
    }
    return true;
  }
};

/// Partial derivatives of a scalar loss, congruent with a ParamSet.
struct Gradient {
  std::vector<LayerTensors> layers;

  static Gradient zeros_like(const ParamSet& params) {
    Gradient g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers)
      g.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.biases.size())});
    return g;
  }

  bool congruent_with(const ParamSet& params) const {
    if (layers.size() != params.layers.size()) return false;
    for (std::size_t k = 0; k < layers.size(); ++k)
      if (layers[k].shape() != params.layers[k].shape() || layers[k].biases.size() != params.layers[k].biases.size())
        return false;
    return true;
  }

  Gradient& operator*=(double s) {
    for (auto& l : layers) {
      l.weights *= s;
      l.biases *= s;
    }
    return *this;
  }

  Vector flatten() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    Vector flat(n);
    Eigen::Index pos = 0;
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat[pos++] = l.weights(r, c);
      for (Eigen::Index r = 0; r < l.biases.size(); ++r) flat[pos++] = l.biases[r];
    }
    return flat;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weights.allFinite() || !l.biases.allFinite()) return false;
    return true;
  }
};

/// Glorot-uniform weights, zero biases; tanh on every layer except the last.
inline ParamSet init_params(const std::vector<LayerShape>& shapes, std::uint64_t seed) {
  check_chain(shapes);
  Rng rng(seed);
  ParamSet p;
  p.layers.reserve(shapes.size());
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto [in, out] = shapes[k];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
    layer.biases = Vector::Zero(static_cast<Eigen::Index>(out));
    layer.activation = (k + 1 == shapes.size()) ? Activation::Identity : Activation::Tanh;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

/// Hidden widths plus environment-fixed boundary dimensions.
inline std::vector<LayerShape> network_shapes(std::size_t state_dim, const std::vector<std::size_t>& hidden,
                                              std::size_t action_count) {
  std::vector<LayerShape> shapes;
  std::size_t in = state_dim;
  for (auto h : hidden) {
    shapes.push_back({in, h});
    in = h;
  }
  shapes.push_back({in, action_count + 1});
  return shapes;
}

struct PolicyValue {
  Vector logits;
  double value = 0.0;
};

/// Post-activation outputs of every layer; activations[0] is the input.
struct ForwardCache {
  std::vector<Vector> activations;
};

// tanh written through exp, which Eigen vectorizes for doubles and its tanh
// does not; agrees with std::tanh to a few ulp of 1 (absolute).
inline void apply_activation(Activation a, Vector& v) {
  if (a == Activation::Tanh) v = 1.0 - 2.0 / ((2.0 * v.array()).exp() + 1.0);
}

inline PolicyValue forward(const ParamSet& params, const Vector& state, ForwardCache* cache = nullptr) {
  if (params.layers.empty()) throw ShapeError("empty parameter set");
  if (static_cast<std::size_t>(state.size()) != params.input_dim())
    throw ShapeError("state length " + std::to_string(state.size()) + " != network input " +
                     std::to_string(params.input_dim()));
  if (params.output_dim() < 2) throw ShapeError("output layer needs at least one logit and a value head");
  if (cache) {
    cache->activations.resize(params.layers.size() + 1);
    cache->activations[0] = state;
  }
  Vector h = state;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Vector z = layer.weights * h + layer.biases;
    apply_activation(layer.activation, z);
    h = std::move(z);
    if (cache) cache->activations[k + 1] = h;
  }
  const Eigen::Index n_logits = h.size() - 1;
  return {h.head(n_logits), h[n_logits]};
}

/// d(loss)/d(logits) and d(loss)/d(value) for a single input.
struct HeadGradient {
  Vector logits;
  double value = 0.0;
};

/// Accumulates the parameter gradient of one input into `grad`.
inline void accumulate_backward(const ParamSet& params, const ForwardCache& cache, const HeadGradient& head,
                                Gradient& grad) {
  const auto n_logits = static_cast<Eigen::Index>(params.action_count());
  if (head.logits.size() != n_logits)
    throw ShapeError("head gradient has " + std::to_string(head.logits.size()) + " logits, network has " +
                     std::to_string(n_logits));
  Vector delta(n_logits + 1);
  delta.head(n_logits) = head.logits;
  delta[n_logits] = head.value;

  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const auto& layer = params.layers[k];
    const Vector& out = cache.activations[k + 1];
    if (layer.activation == Activation::Tanh) delta = delta.array() * (1.0 - out.array().square());
    if (!delta.allFinite()) throw NumericError("non-finite backpropagated error at layer " + std::to_string(k));
    grad.layers[k].weights.noalias() += delta * cache.activations[k].transpose();
    grad.layers[k].biases += delta;
    if (k > 0) delta = layer.weights.transpose() * delta;
  }
}

inline Gradient backward(const ParamSet& params, const Vector& state, const HeadGradient& head) {
  ForwardCache cache;
  forward(params, state, &cache);
  Gradient grad = Gradient::zeros_like(params);
  accumulate_backward(params, cache, head, grad);
  return grad;
}

struct AdamState {
  Gradient first_moment;
  Gradient second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParamSet& params, double learning_rate = 1e-3) {
    AdamState s;
    s.first_moment = Gradient::zeros_like(params);
    s.second_moment = Gradient::zeros_like(params);
    s.learning_rate = learning_rate;
    return s;
  }
};

/// In-place Adam update with bias correction.
inline void adam_update(ParamSet& params, const Gradient& grad, AdamState& opt) {
  if (!grad.congruent_with(params) || !opt.first_moment.congruent_with(params) ||
      !opt.second_moment.congruent_with(params))
    throw ShapeError("Adam: gradient, moments and parameters are not congruent");
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  const double b1 = opt.beta1;
  const double b2 = opt.beta2;
  const double lr = opt.learning_rate;
  const double eps = opt.epsilon;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weights, grad.layers[k].weights, opt.first_moment.layers[k].weights,
           opt.second_moment.layers[k].weights);
    update(params.layers[k].biases, grad.layers[k].biases, opt.first_moment.layers[k].biases,
           opt.second_moment.layers[k].biases);
  }
}

inline std::pair<ParamSet, AdamState> adam_step(ParamSet params, const Gradient& grad, AdamState opt) {
  adam_update(params, grad, opt);
  return {std::move(params), std::move(opt)};
}

inline Vector softmax(const Vector& logits) {
  Vector p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

inline Vector log_softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

inline std::size_t softmax_sample(const Vector& logits, Rng& rng) {
  const Vector p = softmax(logits);
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<std::size_t>(i);
  }
  // u landed in the rounding gap above the cumulative sum
  Eigen::Index last = p.size() - 1;
  while (last > 0 && p[last] == 0.0) --last;
  return static_cast<std::size_t>(last);
}

}  // namespace hfdrl
