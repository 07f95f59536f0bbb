#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "emomis/models/common.hpp"

namespace emomis {

struct LogRegHyper {
  double learning_rate = 0.1;
  std::size_t epochs = 500;
  double l2_penalty = 0.0;
  std::uint64_t seed = 0;  // recorded only; zero init and full-batch updates draw nothing
  bool class_weights = false;
};

/// Multinomial logistic regression: logits = W x + b, softmax output.
class LogisticRegression {
 public:
  LogisticRegression() = default;
  LogisticRegression(std::size_t n_classes, std::size_t dim)
      : n_classes_(n_classes), dim_(dim), weights_(n_classes * dim, 0.0), bias_(n_classes, 0.0) {}

  std::size_t n_classes() const { return n_classes_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t c) const { return {weights_.data() + c * dim_, dim_}; }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

  template <FeatureRow X>
  std::vector<double> logits(const X& x) const {
    if (dim_of(x) != dim_)
      throw Error(Errc::ShapeMismatch, "input dim " + std::to_string(dim_of(x)) + " vs model dim " + std::to_string(dim_));
    std::vector<double> z(n_classes_);
    for (std::size_t c = 0; c < n_classes_; ++c) z[c] = bias_[c] + dot(row(c), x);
    return z;
  }

  template <FeatureRow X>
  std::vector<double> predict_proba(const X& x) const {
    return softmax(logits(x));
  }

  template <FeatureRow X>
  std::size_t predict(const X& x) const {
    return argmax(predict_proba(x));
  }

  struct Gradient {
    double loss = 0.0;
    std::vector<double> weights;  // same layout as the parameters
    std::vector<double> bias;
  };

  /// Weighted mean cross-entropy plus (l2/2)·||W||², and its exact gradient.
  template <FeatureRow X>
  Gradient loss_and_gradient(std::span<const X> xs, std::span<const std::size_t> ys, double l2,
                             std::span<const double> weights = {}) const {
    Gradient g{0.0, std::vector<double>(weights_.size(), 0.0), std::vector<double>(n_classes_, 0.0)};
    double total_w = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) total_w += weights.empty() ? 1.0 : weights[i];
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double wi = (weights.empty() ? 1.0 : weights[i]) / total_w;
      const auto z = logits(xs[i]);
      g.loss += wi * cross_entropy_from_logits(z, ys[i]);
      const auto p = softmax(z);
      for (std::size_t c = 0; c < n_classes_; ++c) {
        const double delta = wi * (p[c] - (c == ys[i] ? 1.0 : 0.0));
        g.bias[c] += delta;
        axpy(std::span<double>(g.weights.data() + c * dim_, dim_), delta, xs[i]);
      }
    }
    if (l2 > 0.0) {
      double sq = 0.0;
      for (std::size_t k = 0; k < weights_.size(); ++k) {
        sq += weights_[k] * weights_[k];
        g.weights[k] += l2 * weights_[k];
      }
      g.loss += 0.5 * l2 * sq;
    }
    return g;
  }

 private:
  std::size_t n_classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> weights_;  // row-major n_classes x dim
  std::vector<double> bias_;
};

/// Full-batch gradient descent from zero weights. When `loss_trace` is given
/// it receives the objective before every update and after the last one.
template <FeatureRow X>
LogisticRegression train_logreg(std::span<const X> xs, std::span<const std::size_t> ys, std::size_t n_classes,
                                const LogRegHyper& hp, std::vector<double>* loss_trace = nullptr) {
  check_training_set(xs, ys, n_classes);
  LogisticRegression model(n_classes, dim_of(xs.front()));
  const auto sw = sample_weights(ys, n_classes, hp.class_weights);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto g = model.loss_and_gradient(xs, ys, hp.l2_penalty, sw);
    if (loss_trace) loss_trace->push_back(g.loss);
    for (std::size_t k = 0; k < g.weights.size(); ++k) model.weights()[k] -= hp.learning_rate * g.weights[k];
    for (std::size_t c = 0; c < n_classes; ++c) model.bias()[c] -= hp.learning_rate * g.bias[c];
  }
  if (loss_trace) loss_trace->push_back(model.loss_and_gradient(xs, ys, hp.l2_penalty, sw).loss);
  return model;
}

template <FeatureRow X>
LogisticRegression train_logreg(const std::vector<X>& xs, const std::vector<std::size_t>& ys, std::size_t n_classes,
                                const LogRegHyper& hp, std::vector<double>* loss_trace = nullptr) {
  return train_logreg(std::span<const X>(xs), std::span<const std::size_t>(ys), n_classes, hp, loss_trace);
}

}  // namespace emomis
