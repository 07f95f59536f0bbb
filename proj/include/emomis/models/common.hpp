#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emomis/error.hpp"
#include "emomis/features.hpp"

namespace emomis {

template <typename X>
concept FeatureRow = std::same_as<X, DenseVector> || std::same_as<X, SparseVector>;

/// Dot product of a dense weight row with a feature row.
inline double dot(std::span<const double> w, const DenseVector& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += w[j] * x[j];
  return s;
}

inline double dot(std::span<const double> w, const SparseVector& x) {
  double s = 0.0;
  for (const auto& [j, v] : x.entries) s += w[j] * v;
  return s;
}

/// w += a * x
inline void axpy(std::span<double> w, double a, const DenseVector& x) {
  for (std::size_t j = 0; j < x.size(); ++j) w[j] += a * x[j];
}

inline void axpy(std::span<double> w, double a, const SparseVector& x) {
  for (const auto& [j, v] : x.entries) w[j] += a * v;
}

/// Numerically stable softmax (max subtracted before exponentiating).
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (auto& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (auto& v : p) v /= z;
  return p;
}

/// log(sum(exp(logits))) - logits[target], stable.
inline double cross_entropy_from_logits(std::span<const double> logits, std::size_t target) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  return m + std::log(z) - logits[target];
}

/// Index of the largest component; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

template <FeatureRow X>
void check_training_set(std::span<const X> xs, std::span<const std::size_t> ys, std::size_t n_classes) {
  if (xs.empty()) throw Error(Errc::EmptyTrainingSet, "no training examples");
  if (xs.size() != ys.size())
    throw Error(Errc::ShapeMismatch,
                std::to_string(xs.size()) + " feature rows vs " + std::to_string(ys.size()) + " labels");
  if (n_classes < 1) throw Error(Errc::InvalidArgument, "need at least one class");
  const std::size_t d = dim_of(xs.front());
  for (const auto& x : xs)
    if (dim_of(x) != d) throw Error(Errc::ShapeMismatch, "feature rows differ in dimension");
  for (auto y : ys)
    if (y >= n_classes) throw Error(Errc::ShapeMismatch, "class code " + std::to_string(y) + " out of range");
}

/// Per-example weights: all ones, or inverse class frequency
/// n / (present_classes * count[class]) when `balanced` is set.
inline std::vector<double> sample_weights(std::span<const std::size_t> ys, std::size_t n_classes, bool balanced) {
  std::vector<double> w(ys.size(), 1.0);
  if (!balanced) return w;
  std::vector<std::size_t> counts(n_classes, 0);
  for (auto y : ys) ++counts[y];
  const auto present = static_cast<double>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  for (std::size_t i = 0; i < ys.size(); ++i)
    w[i] = static_cast<double>(ys.size()) / (present * static_cast<double>(counts[ys[i]]));
  return w;
}

}  // namespace emomis
