#pragma once

// Text -> features -> model. Used wherever raw text must be re-encoded, such
// as occlusion attribution over a trained run.

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "emomis/corpus.hpp"
#include "emomis/features.hpp"
#include "emomis/models/model.hpp"

namespace emomis {

struct TfidfFeaturizer {
  Vocabulary vocab;
};

struct GloveFeaturizer {
  std::shared_ptr<const EmbeddingTable> table;
  std::string source;  // path the table was read from
};

/// One hashing encoder, or two fused in order.
struct HashFeaturizer {
  std::vector<HashSettings> channels;
};

using Featurizer = std::variant<TfidfFeaturizer, GloveFeaturizer, HashFeaturizer>;
using Features = std::variant<DenseVector, SparseVector>;

/// Featurizes already-cleaned text.
inline Features featurize(const Featurizer& f, std::string_view text) {
  return std::visit(
      [&](const auto& fz) -> Features {
        using T = std::decay_t<decltype(fz)>;
        if constexpr (std::is_same_v<T, TfidfFeaturizer>) {
          return transform_tfidf(fz.vocab, text);
        } else if constexpr (std::is_same_v<T, GloveFeaturizer>) {
          return average_embedding(*fz.table, tokenize(text));
        } else {
          if (fz.channels.empty()) throw Error(Errc::InvalidArgument, "hash featurizer has no channels");
          DenseVector v = hash_encode(text, fz.channels[0].dim, fz.channels[0].seed);
          for (std::size_t k = 1; k < fz.channels.size(); ++k)
            v = fuse(v, hash_encode(text, fz.channels[k].dim, fz.channels[k].seed));
          return v;
        }
      },
      f);
}

inline nlohmann::json featurizer_to_json(const Featurizer& f) {
  return std::visit(
      [](const auto& fz) -> nlohmann::json {
        using T = std::decay_t<decltype(fz)>;
        if constexpr (std::is_same_v<T, TfidfFeaturizer>) {
          return {{"type", "tfidf"}, {"vocabulary", vocabulary_to_json(fz.vocab)}};
        } else if constexpr (std::is_same_v<T, GloveFeaturizer>) {
          return {{"type", "glove"}, {"path", fz.source}};
        } else {
          auto ch = nlohmann::json::array();
          for (const auto& c : fz.channels) ch.push_back({{"dim", c.dim}, {"seed", c.seed}});
          return {{"type", "hash"}, {"channels", ch}};
        }
      },
      f);
}

/// GloVe featurizers are stored by path; the table is reloaded from it.
inline Featurizer featurizer_from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "tfidf") return TfidfFeaturizer{vocabulary_from_json(j.at("vocabulary"))};
    if (type == "glove") {
      const auto path = j.at("path").get<std::string>();
      return GloveFeaturizer{std::make_shared<const EmbeddingTable>(load_glove(path)), path};
    }
    if (type == "hash") {
      HashFeaturizer h;
      for (const auto& c : j.at("channels")) h.channels.push_back({c.at("dim").get<std::size_t>(), c.at("seed").get<std::uint64_t>()});
      if (h.channels.empty()) throw Error(Errc::SchemaError, "hash featurizer without channels");
      return h;
    }
    throw Error(Errc::SchemaError, "unknown featurizer type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

class TextPipeline {
 public:
  TextPipeline(Featurizer featurizer, Model model) : featurizer_(std::move(featurizer)), model_(std::move(model)) {}

  std::vector<double> predict_proba(std::string_view clean_text) const {
    return std::visit([&](const auto& x) { return emomis::predict_proba(model_, x); }, featurize(featurizer_, clean_text));
  }

  const Featurizer& featurizer() const { return featurizer_; }
  const Model& model() const { return model_; }

 private:
  Featurizer featurizer_;
  Model model_;
};

}  // namespace emomis
