#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <variant>

#include <json.hpp>

#include "emomis/io.hpp"
#include "emomis/models/forest.hpp"
#include "emomis/models/logreg.hpp"
#include "emomis/models/mlp.hpp"

namespace emomis {

using Model = std::variant<LogisticRegression, Mlp, RandomForest>;

inline constexpr int kModelVersion = 1;

inline std::string_view model_kind(const Model& m) {
  static constexpr std::string_view kinds[] = {"logreg", "mlp", "forest"};
  return kinds[m.index()];
}

inline std::size_t model_dim(const Model& m) {
  return std::visit([](const auto& x) { return x.dim(); }, m);
}

inline std::size_t model_classes(const Model& m) {
  return std::visit([](const auto& x) { return x.n_classes(); }, m);
}

/// Class distribution for any model. The MLP accepts dense rows only.
template <FeatureRow X>
std::vector<double> predict_proba(const Model& m, const X& x) {
  return std::visit(
      [&](const auto& model) -> std::vector<double> {
        if constexpr (requires { model.predict_proba(x); })
          return model.predict_proba(x);
        else
          throw Error(Errc::ShapeMismatch, std::string(model_kind(m)) + " model needs dense input");
      },
      m);
}

template <FeatureRow X>
std::size_t predict(const Model& m, const X& x) {
  return argmax(predict_proba(m, x));
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json tree_to_json(const DecisionTree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : t.nodes()) {
    if (n.is_leaf())
      nodes.push_back({{"counts", n.counts}});
    else
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
  return nodes;
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::SchemaError, what);
}

inline std::vector<double> finite_array(const nlohmann::json& j, std::size_t expected, const char* what) {
  require(j.is_array(), std::string(what) + " must be an array");
  auto v = j.get<std::vector<double>>();
  require(v.size() == expected, std::string(what) + " has wrong length");
  for (double x : v) require(std::isfinite(x), std::string(what) + " has a non-finite value");
  return v;
}

inline DecisionTree tree_from_json(const nlohmann::json& j, std::size_t n_classes, std::size_t dim) {
  require(j.is_array() && !j.empty(), "tree must be a non-empty node array");
  std::vector<TreeNode> nodes;
  const auto count = static_cast<std::int64_t>(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& jn = j[i];
    TreeNode n;
    if (jn.contains("counts")) {
      n.counts = finite_array(jn["counts"], n_classes, "leaf counts");
      double total = 0.0;
      for (double c : n.counts) {
        require(c >= 0.0, "negative leaf count");
        total += c;
      }
      require(total > 0.0, "leaf counts sum to zero");
    } else {
      n.feature = jn.at("feature").get<std::int32_t>();
      n.threshold = jn.at("threshold").get<double>();
      n.left = jn.at("left").get<std::int32_t>();
      n.right = jn.at("right").get<std::int32_t>();
      require(n.feature >= 0 && static_cast<std::size_t>(n.feature) < dim, "split feature out of range");
      require(std::isfinite(n.threshold), "non-finite threshold");
      // Children come after their parent, which rules out cycles.
      const auto self = static_cast<std::int64_t>(i);
      require(n.left > self && n.left < count && n.right > self && n.right < count, "bad child index");
    }
    nodes.push_back(std::move(n));
  }
  return DecisionTree(n_classes, std::move(nodes));
}

}  // namespace detail

inline nlohmann::json model_to_json(const Model& m) {
  nlohmann::json params;
  std::visit(
      [&](const auto& model) {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, LogisticRegression>) {
          params = {{"weights", model.weights()}, {"bias", model.bias()}};
        } else if constexpr (std::is_same_v<T, Mlp>) {
          params = {{"hidden", model.hidden()}, {"w1", model.w1()}, {"b1", model.b1()}, {"w2", model.w2()},
                    {"b2", model.b2()}};
        } else {
          auto trees = nlohmann::json::array();
          for (const auto& t : model.trees()) trees.push_back(detail::tree_to_json(t));
          params = {{"trees", trees}};
        }
      },
      m);
  return {{"kind", model_kind(m)},
          {"version", kModelVersion},
          {"n_classes", model_classes(m)},
          {"dim", model_dim(m)},
          {"params", params}};
}

/// Validates the whole document before returning; any defect is a SchemaError.
inline Model model_from_json(const nlohmann::json& j) {
  using detail::require;
  try {
    require(j.is_object(), "model document must be an object");
    require(j.value("version", -1) == kModelVersion, "unsupported model version");
    const auto kind = j.at("kind").get<std::string>();
    const auto n_classes = j.at("n_classes").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    require(n_classes >= 1 && dim >= 1, "n_classes and dim must be positive");
    const auto& p = j.at("params");
    if (kind == "logreg") {
      LogisticRegression m(n_classes, dim);
      m.weights() = detail::finite_array(p.at("weights"), n_classes * dim, "weights");
      m.bias() = detail::finite_array(p.at("bias"), n_classes, "bias");
      return m;
    }
    if (kind == "mlp") {
      const auto hidden = p.at("hidden").get<std::size_t>();
      require(hidden >= 1, "hidden size must be positive");
      Mlp m(dim, hidden, n_classes);
      m.w1() = detail::finite_array(p.at("w1"), hidden * dim, "w1");
      m.b1() = detail::finite_array(p.at("b1"), hidden, "b1");
      m.w2() = detail::finite_array(p.at("w2"), n_classes * hidden, "w2");
      m.b2() = detail::finite_array(p.at("b2"), n_classes, "b2");
      return m;
    }
    if (kind == "forest") {
      const auto& jt = p.at("trees");
      require(jt.is_array() && !jt.empty(), "forest needs at least one tree");
      std::vector<DecisionTree> trees;
      for (const auto& t : jt) trees.push_back(detail::tree_from_json(t, n_classes, dim));
      return RandomForest(n_classes, dim, std::move(trees));
    }
    throw Error(Errc::SchemaError, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

/// Writes the model document; `extra` keys (e.g. a featurizer description)
/// are merged at top level and ignored by load_model.
inline void save_model(const Model& m, const std::filesystem::path& path, const nlohmann::json& extra = {}) {
  auto j = model_to_json(m);
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) j[k] = v;
  atomic_write(path, j.dump() + "\n");
}

inline nlohmann::json load_model_document(const std::filesystem::path& path) {
  const auto text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, std::string("unparseable model file: ") + e.what());
  }
}

inline Model load_model(const std::filesystem::path& path) { return model_from_json(load_model_document(path)); }

}  // namespace emomis
