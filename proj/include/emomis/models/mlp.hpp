#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "emomis/models/common.hpp"
#include "emomis/rng.hpp"

namespace emomis {

struct MlpHyper {
  std::size_t hidden_size = 64;
  double learning_rate = 0.05;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double l2_penalty = 0.0;
  bool class_weights = false;
};

/// One hidden rectifier layer and a softmax output: dim -> hidden -> n_classes.
/// Parameters flatten in the order W1 (hidden x dim), b1, W2 (n_classes x hidden), b2.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t dim, std::size_t hidden, std::size_t n_classes)
      : dim_(dim),
        hidden_(hidden),
        n_classes_(n_classes),
        w1_(hidden * dim, 0.0),
        b1_(hidden, 0.0),
        w2_(n_classes * hidden, 0.0),
        b2_(n_classes, 0.0) {}

  /// Weights uniform in ±1/sqrt(fan_in), biases zero.
  static Mlp initialized(std::size_t dim, std::size_t hidden, std::size_t n_classes, std::uint64_t seed) {
    if (dim == 0 || hidden == 0 || n_classes == 0) throw Error(Errc::InvalidArgument, "mlp layer sizes must be positive");
    Mlp m(dim, hidden, n_classes);
    Rng rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& w : m.w1_) w = rng.uniform(-a1, a1);
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : m.w2_) w = rng.uniform(-a2, a2);
    return m;
  }

  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t n_classes() const { return n_classes_; }

  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& w2() const { return w2_; }
  const std::vector<double>& b2() const { return b2_; }

  std::size_t parameter_count() const { return w1_.size() + b1_.size() + w2_.size() + b2_.size(); }

  std::vector<double> parameters() const {
    std::vector<double> p;
    p.reserve(parameter_count());
    for (const auto* v : {&w1_, &b1_, &w2_, &b2_}) p.insert(p.end(), v->begin(), v->end());
    return p;
  }

  void set_parameters(std::span<const double> p) {
    if (p.size() != parameter_count()) throw Error(Errc::ShapeMismatch, "parameter vector has wrong length");
    std::size_t k = 0;
    for (auto* v : {&w1_, &b1_, &w2_, &b2_})
      for (auto& x : *v) x = p[k++];
  }

  struct Forward {
    std::vector<double> pre;     // hidden pre-activations
    std::vector<double> act;     // rectified
    std::vector<double> logits;
  };

  Forward forward(const DenseVector& x) const {
    check_input(x);
    Forward f{std::vector<double>(hidden_), std::vector<double>(hidden_), std::vector<double>(n_classes_)};
    for (std::size_t h = 0; h < hidden_; ++h) {
      f.pre[h] = b1_[h] + dot(std::span<const double>(w1_.data() + h * dim_, dim_), x);
      f.act[h] = f.pre[h] > 0.0 ? f.pre[h] : 0.0;
    }
    for (std::size_t c = 0; c < n_classes_; ++c)
      f.logits[c] = b2_[c] + dot(std::span<const double>(w2_.data() + c * hidden_, hidden_), f.act);
    return f;
  }

  std::vector<double> logits(const DenseVector& x) const { return forward(x).logits; }
  std::vector<double> predict_proba(const DenseVector& x) const { return softmax(forward(x).logits); }
  std::size_t predict(const DenseVector& x) const { return argmax(predict_proba(x)); }

  /// d logit[cls] / d x by backpropagation to the input.
  std::vector<double> input_gradient(const DenseVector& x, std::size_t cls) const {
    if (cls >= n_classes_) throw Error(Errc::ShapeMismatch, "class code out of range");
    const auto f = forward(x);
    std::vector<double> g(dim_, 0.0);
    for (std::size_t h = 0; h < hidden_; ++h) {
      if (f.pre[h] <= 0.0) continue;
      const double dh = w2_[cls * hidden_ + h];
      for (std::size_t j = 0; j < dim_; ++j) g[j] += dh * w1_[h * dim_ + j];
    }
    return g;
  }

  /// Weighted mean cross-entropy plus (l2/2)·(||W1||² + ||W2||²) and its
  /// gradient, flattened like parameters().
  std::pair<double, std::vector<double>> loss_and_gradient(std::span<const DenseVector> xs,
                                                           std::span<const std::size_t> ys, double l2 = 0.0,
                                                           std::span<const double> weights = {}) const {
    std::vector<double> grad(parameter_count(), 0.0);
    double* gw1 = grad.data();
    double* gb1 = gw1 + w1_.size();
    double* gw2 = gb1 + b1_.size();
    double* gb2 = gw2 + w2_.size();
    double total_w = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) total_w += weights.empty() ? 1.0 : weights[i];
    double loss = 0.0;
    std::vector<double> dact(hidden_);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double wi = (weights.empty() ? 1.0 : weights[i]) / total_w;
      const auto f = forward(xs[i]);
      loss += wi * cross_entropy_from_logits(f.logits, ys[i]);
      const auto p = softmax(f.logits);
      std::fill(dact.begin(), dact.end(), 0.0);
      for (std::size_t c = 0; c < n_classes_; ++c) {
        const double dz = wi * (p[c] - (c == ys[i] ? 1.0 : 0.0));
        gb2[c] += dz;
        for (std::size_t h = 0; h < hidden_; ++h) {
          gw2[c * hidden_ + h] += dz * f.act[h];
          dact[h] += dz * w2_[c * hidden_ + h];
        }
      }
      for (std::size_t h = 0; h < hidden_; ++h) {
        if (f.pre[h] <= 0.0) continue;
        gb1[h] += dact[h];
        for (std::size_t j = 0; j < dim_; ++j) gw1[h * dim_ + j] += dact[h] * xs[i][j];
      }
    }
    if (l2 > 0.0) {
      double sq = 0.0;
      for (std::size_t k = 0; k < w1_.size(); ++k) {
        sq += w1_[k] * w1_[k];
        gw1[k] += l2 * w1_[k];
      }
      for (std::size_t k = 0; k < w2_.size(); ++k) {
        sq += w2_[k] * w2_[k];
        gw2[k] += l2 * w2_[k];
      }
      loss += 0.5 * l2 * sq;
    }
    return {loss, std::move(grad)};
  }

 private:
  void check_input(const DenseVector& x) const {
    if (x.size() != dim_)
      throw Error(Errc::ShapeMismatch, "input dim " + std::to_string(x.size()) + " vs model dim " + std::to_string(dim_));
  }

  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<double> w1_, b1_, w2_, b2_;
};

/// Mini-batch gradient descent with backpropagation. Each epoch reshuffles
/// the example order with the seeded generator, so a fixed seed fixes both
/// the initialization and every batch.
inline Mlp train_mlp(std::span<const DenseVector> xs, std::span<const std::size_t> ys, std::size_t n_classes,
                     const MlpHyper& hp) {
  check_training_set(xs, ys, n_classes);
  if (hp.batch_size == 0) throw Error(Errc::InvalidArgument, "batch_size must be positive");
  Mlp model = Mlp::initialized(xs.front().size(), hp.hidden_size, n_classes, hp.seed);
  Rng rng(hp.seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  const auto sw = sample_weights(ys, n_classes, hp.class_weights);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<DenseVector> bx;
  std::vector<std::size_t> by;
  std::vector<double> bw;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle(std::span(order), rng);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      bx.clear();
      by.clear();
      bw.clear();
      for (std::size_t k = start; k < end; ++k) {
        bx.push_back(xs[order[k]]);
        by.push_back(ys[order[k]]);
        bw.push_back(sw[order[k]]);
      }
      auto [loss, grad] = model.loss_and_gradient(bx, by, hp.l2_penalty, bw);
      auto params = model.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) params[k] -= hp.learning_rate * grad[k];
      model.set_parameters(params);
    }
  }
  return model;
}

inline Mlp train_mlp(const std::vector<DenseVector>& xs, const std::vector<std::size_t>& ys, std::size_t n_classes,
                     const MlpHyper& hp) {
  return train_mlp(std::span<const DenseVector>(xs), std::span<const std::size_t>(ys), n_classes, hp);
}

}  // namespace emomis
