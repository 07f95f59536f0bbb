#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "emomis/models/common.hpp"
#include "emomis/rng.hpp"

namespace emomis {

/// Internal nodes send x[feature] <= threshold left. Leaves (feature < 0)
/// carry the (weighted) class counts of the training rows that reached them.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::vector<double> counts;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::size_t n_classes, std::vector<TreeNode> nodes) : n_classes_(n_classes), nodes_(std::move(nodes)) {}

  /// A single-leaf tree holding the given counts.
  static DecisionTree leaf(std::vector<double> counts) {
    TreeNode n;
    const std::size_t k = counts.size();
    n.counts = std::move(counts);
    return DecisionTree(k, {std::move(n)});
  }

  std::size_t n_classes() const { return n_classes_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  template <FeatureRow X>
  const TreeNode& leaf_for(const X& x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(value_at(x, static_cast<std::size_t>(n.feature)) <= n.threshold ? n.left : n.right);
    }
    return nodes_[i];
  }

  template <FeatureRow X>
  std::vector<double> predict_proba(const X& x) const {
    const auto& counts = leaf_for(x).counts;
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    std::vector<double> p(counts.size());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = counts[c] / total;
    return p;
  }

  std::size_t depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[i].left)),
                        depth_from(static_cast<std::size_t>(nodes_[i].right)));
  }

  std::size_t n_classes_ = 0;
  std::vector<TreeNode> nodes_;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;          // unbounded when empty
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> features_per_split;  // floor(sqrt(dim)) when empty
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool class_weights = false;
};

inline double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / total) * (c / total);
  return 1.0 - s;
}

struct SplitChoice {
  bool valid = false;
  double threshold = 0.0;
  double impurity = std::numeric_limits<double>::infinity();  // weighted child Gini
};

struct LabeledValue {
  double value;
  std::size_t label;
  double weight = 1.0;
};

inline double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

/// Best threshold for one feature: sorts by value and scans the midpoints
/// between consecutive distinct values, keeping at least `min_leaf` rows on
/// each side. Minimizes (W_l·gini_l + W_r·gini_r) / W; ties keep the lowest
/// threshold. `rows` is reordered.
inline SplitChoice best_split(std::span<LabeledValue> rows, std::size_t n_classes, std::size_t min_leaf) {
  SplitChoice best;
  if (rows.size() < 2) return best;
  std::sort(rows.begin(), rows.end(), [](const LabeledValue& a, const LabeledValue& b) { return a.value < b.value; });
  std::vector<double> left(n_classes, 0.0), right(n_classes, 0.0);
  double wl = 0.0, wr = 0.0;
  for (const auto& r : rows) {
    right[r.label] += r.weight;
    wr += r.weight;
  }
  const double total = wr;
  const std::size_t leaf = std::max<std::size_t>(min_leaf, 1);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    left[rows[i].label] += rows[i].weight;
    right[rows[i].label] -= rows[i].weight;
    wl += rows[i].weight;
    wr -= rows[i].weight;
    if (!(rows[i].value < rows[i + 1].value)) continue;
    if (i + 1 < leaf || rows.size() - (i + 1) < leaf) continue;
    const double imp = (wl * gini(left, wl) + wr * gini(right, wr)) / total;
    if (imp < best.impurity) {
      best.valid = true;
      best.impurity = imp;
      best.threshold = midpoint(rows[i].value, rows[i + 1].value);
    }
  }
  return best;
}

namespace detail {

/// Candidate features at a node: every index for dense rows; for sparse rows
/// only indices nonzero in some node row (the rest are constant zero).
inline std::vector<std::size_t> candidate_features(std::span<const DenseVector> xs, std::span<const std::size_t>,
                                                   std::size_t dim) {
  std::vector<std::size_t> f(dim);
  std::iota(f.begin(), f.end(), std::size_t{0});
  (void)xs;
  return f;
}

inline std::vector<std::size_t> candidate_features(std::span<const SparseVector> xs, std::span<const std::size_t> rows,
                                                   std::size_t) {
  std::vector<std::size_t> f;
  for (auto r : rows)
    for (const auto& e : xs[r].entries) f.push_back(e.first);
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

template <FeatureRow X>
class TreeBuilder {
 public:
  TreeBuilder(std::span<const X> xs, std::span<const std::size_t> ys, std::span<const double> weights,
              std::size_t n_classes, const ForestParams& fp, std::size_t mtry, Rng& rng)
      : xs_(xs), ys_(ys), weights_(weights), n_classes_(n_classes), fp_(fp), mtry_(mtry), rng_(rng) {}

  /// `rows` may repeat indices (bootstrap draws).
  DecisionTree build(std::vector<std::size_t> rows) {
    nodes_.clear();
    grow(std::move(rows), 0);
    return DecisionTree(n_classes_, std::move(nodes_));
  }

 private:
  std::int32_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    std::vector<double> counts(n_classes_, 0.0);
    for (auto r : rows) counts[ys_[r]] += weights_[r];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
    const bool depth_cap = fp_.max_depth && depth >= *fp_.max_depth;
    const bool too_small = rows.size() < 2 * std::max<std::size_t>(fp_.min_samples_leaf, 1);
    if (pure || depth_cap || too_small) return make_leaf(id, std::move(counts));

    // Lazy partial Fisher-Yates over the candidates: draw without replacement,
    // skip features constant on this node, stop after mtry usable ones.
    auto features = candidate_features(xs_, rows, dim_of(xs_.front()));
    std::vector<LabeledValue> scratch(rows.size());
    SplitChoice best;
    std::int32_t best_feature = -1;
    std::size_t usable = 0;
    for (std::size_t k = 0; k < features.size() && usable < mtry_; ++k) {
      std::swap(features[k], features[k + rng_.below(features.size() - k)]);
      const std::size_t f = features[k];
      bool constant = true;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        scratch[i] = {value_at(xs_[rows[i]], f), ys_[rows[i]], weights_[rows[i]]};
        if (scratch[i].value != scratch[0].value) constant = false;
      }
      if (constant) continue;
      ++usable;
      const auto choice = best_split(scratch, n_classes_, fp_.min_samples_leaf);
      if (choice.valid && choice.impurity < best.impurity) {
        best = choice;
        best_feature = static_cast<std::int32_t>(f);
      }
    }
    if (best_feature < 0) return make_leaf(id, std::move(counts));

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows)
      (value_at(xs_[r], static_cast<std::size_t>(best_feature)) <= best.threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const auto l = grow(std::move(left_rows), depth + 1);
    const auto r = grow(std::move(right_rows), depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::int32_t make_leaf(std::int32_t id, std::vector<double> counts) {
    nodes_[id].counts = std::move(counts);
    return id;
  }

  std::span<const X> xs_;
  std::span<const std::size_t> ys_;
  std::span<const double> weights_;
  std::size_t n_classes_;
  const ForestParams& fp_;
  std::size_t mtry_;
  Rng& rng_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

/// Averages the per-tree leaf distributions.
class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::size_t n_classes, std::size_t dim, std::vector<DecisionTree> trees)
      : n_classes_(n_classes), dim_(dim), trees_(std::move(trees)) {}

  std::size_t n_classes() const { return n_classes_; }
  std::size_t dim() const { return dim_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  template <FeatureRow X>
  std::vector<double> predict_proba(const X& x) const {
    if (dim_of(x) != dim_)
      throw Error(Errc::ShapeMismatch, "input dim " + std::to_string(dim_of(x)) + " vs model dim " + std::to_string(dim_));
    std::vector<double> p(n_classes_, 0.0);
    for (const auto& t : trees_) {
      const auto q = t.predict_proba(x);
      for (std::size_t c = 0; c < n_classes_; ++c) p[c] += q[c];
    }
    for (auto& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  template <FeatureRow X>
  std::size_t predict(const X& x) const {
    return argmax(predict_proba(x));
  }

  bool operator==(const RandomForest&) const = default;

 private:
  std::size_t n_classes_ = 0;
  std::size_t dim_ = 0;
  std::vector<DecisionTree> trees_;
};

/// Tree t draws from its own generator seeded with seed + t, so the forest is
/// identical for any thread count.
template <FeatureRow X>
RandomForest train_forest(std::span<const X> xs, std::span<const std::size_t> ys, std::size_t n_classes,
                          const ForestParams& fp) {
  check_training_set(xs, ys, n_classes);
  if (fp.n_trees < 1) throw Error(Errc::InvalidArgument, "n_trees must be at least 1");
  const std::size_t dim = dim_of(xs.front());
  if (dim < 1) throw Error(Errc::ShapeMismatch, "features have zero dimension");
  const std::size_t mtry = fp.features_per_split.value_or(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)))));
  if (mtry < 1 || mtry > dim) throw Error(Errc::InvalidArgument, "features_per_split must lie in [1, dim]");
  const auto weights = sample_weights(ys, n_classes, fp.class_weights);

  std::vector<DecisionTree> trees(fp.n_trees);
  auto build_tree = [&](std::size_t t) {
    Rng rng(fp.seed + t);
    std::vector<std::size_t> rows(xs.size());
    if (fp.bootstrap)
      for (auto& r : rows) r = rng.below(xs.size());
    else
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    detail::TreeBuilder<X> builder(xs, ys, weights, n_classes, fp, mtry, rng);
    trees[t] = builder.build(std::move(rows));
  };

  const std::size_t threads = std::clamp<std::size_t>(fp.threads, 1, fp.n_trees);
  if (threads == 1) {
    for (std::size_t t = 0; t < fp.n_trees; ++t) build_tree(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < fp.n_trees; t += threads) build_tree(t);
      });
  }
  return RandomForest(n_classes, dim, std::move(trees));
}

template <FeatureRow X>
RandomForest train_forest(const std::vector<X>& xs, const std::vector<std::size_t>& ys, std::size_t n_classes,
                          const ForestParams& fp) {
  return train_forest(std::span<const X>(xs), std::span<const std::size_t>(ys), n_classes, fp);
}

}  // namespace emomis
