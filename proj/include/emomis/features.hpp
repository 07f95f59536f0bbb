#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "emomis/error.hpp"
#include "emomis/io.hpp"
#include "emomis/rng.hpp"

namespace emomis {

using DenseVector = std::vector<double>;

/// (index, weight) pairs with strictly increasing indices and no stored zeros.
/// `dim` is the length of the space the vector lives in.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;
  std::size_t dim = 0;

  /// Binary search; absent indices read as zero.
  double at(std::size_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, std::size_t i) { return e.first < i; });
    return it != entries.end() && it->first == index ? it->second : 0.0;
  }

  DenseVector to_dense() const {
    DenseVector d(dim, 0.0);
    for (const auto& [i, w] : entries) d[i] = w;
    return d;
  }

  bool operator==(const SparseVector&) const = default;
};

inline std::size_t dim_of(const DenseVector& x) { return x.size(); }
inline std::size_t dim_of(const SparseVector& x) { return x.dim; }
inline double value_at(const DenseVector& x, std::size_t j) { return x[j]; }
inline double value_at(const SparseVector& x, std::size_t j) { return x.at(j); }

inline double l2_norm(const DenseVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double l2_norm(const SparseVector& v) {
  double s = 0.0;
  for (const auto& [_, w] : v.entries) s += w * w;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Tokenization

/// Lowercased maximal runs of ASCII alphanumerics. Bytes of multi-byte UTF-8
/// sequences count as token characters so non-Latin words and emoji survive
/// as (parts of) tokens. Everything else, '#' included, separates.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens, std::optional<std::size_t> skip = std::nullopt) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (skip && *skip == i) continue;
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// TFIDF

struct Vocabulary {
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::string> tokens;  // index -> token
  std::vector<std::size_t> df;      // index -> document frequency
  std::size_t n_docs = 0;

  std::size_t size() const { return tokens.size(); }
  std::optional<std::uint32_t> find(std::string_view token) const {
    auto it = index.find(std::string(token));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }
  std::size_t df_of(std::string_view token) const {
    auto i = find(token);
    return i ? df[*i] : 0;
  }
};

/// Indices follow first appearance in document order, so the fit is
/// deterministic.
inline Vocabulary fit_tfidf(const std::vector<std::string>& documents) {
  if (documents.empty()) throw Error(Errc::EmptyCorpus, "tfidf needs at least one document");
  Vocabulary v;
  v.n_docs = documents.size();
  for (const auto& doc : documents) {
    std::unordered_set<std::uint32_t> seen;
    for (auto& tok : tokenize(doc)) {
      auto [it, inserted] = v.index.try_emplace(tok, static_cast<std::uint32_t>(v.tokens.size()));
      if (inserted) {
        v.tokens.push_back(tok);
        v.df.push_back(0);
      }
      if (seen.insert(it->second).second) ++v.df[it->second];
    }
  }
  return v;
}

inline double smoothed_idf(const Vocabulary& v, std::uint32_t i) {
  return std::log((1.0 + static_cast<double>(v.n_docs)) / (1.0 + static_cast<double>(v.df[i]))) + 1.0;
}

/// weight(t) = raw count * (ln((1 + n_docs) / (1 + df)) + 1), then L2-normalized.
inline SparseVector transform_tfidf(const Vocabulary& vocab, std::string_view text) {
  std::map<std::uint32_t, double> counts;
  for (const auto& tok : tokenize(text))
    if (auto i = vocab.find(tok)) counts[*i] += 1.0;
  SparseVector out;
  out.dim = vocab.size();
  for (const auto& [i, tf] : counts) out.entries.emplace_back(i, tf * smoothed_idf(vocab, i));
  const double norm = l2_norm(out);
  if (norm > 0.0)
    for (auto& e : out.entries) e.second /= norm;
  return out;
}

inline nlohmann::json vocabulary_to_json(const Vocabulary& v) {
  return {{"n_docs", v.n_docs}, {"tokens", v.tokens}, {"df", v.df}};
}

inline Vocabulary vocabulary_from_json(const nlohmann::json& j) {
  Vocabulary v;
  v.n_docs = j.at("n_docs").get<std::size_t>();
  v.tokens = j.at("tokens").get<std::vector<std::string>>();
  v.df = j.at("df").get<std::vector<std::size_t>>();
  if (v.df.size() != v.tokens.size()) throw Error(Errc::SchemaError, "vocabulary df/tokens length differ");
  for (std::size_t i = 0; i < v.tokens.size(); ++i) {
    if (v.df[i] < 1 || v.df[i] > v.n_docs) throw Error(Errc::SchemaError, "document frequency out of range");
    if (!v.index.emplace(v.tokens[i], static_cast<std::uint32_t>(i)).second)
      throw Error(Errc::SchemaError, "duplicate vocabulary token " + v.tokens[i]);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Word embeddings (GloVe text format)

struct EmbeddingTable {
  std::unordered_map<std::string, DenseVector> vectors;
  std::size_t dim = 0;

  std::size_t size() const { return vectors.size(); }
  const DenseVector* find(std::string_view word) const {
    auto it = vectors.find(std::string(word));
    return it == vectors.end() ? nullptr : &it->second;
  }
};

namespace detail {
inline bool parse_real(std::string_view s, double& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) parts.push_back(line.substr(i, j - i));
    i = j;
  }
  return parts;
}
}  // namespace detail

/// `word f1 ... fd` per line; dimension fixed by the first line. Line numbers
/// in errors are 1-based. A repeated word keeps its first vector.
inline EmbeddingTable parse_glove(std::string_view content) {
  EmbeddingTable table;
  const auto lines = split_lines(content);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const auto parts = detail::split_spaces(lines[ln]);
    if (parts.empty()) continue;
    if (parts.size() < 2) throw Error(Errc::ParseError, "line has no vector components", ln + 1, "line");
    const std::size_t d = parts.size() - 1;
    if (table.dim == 0)
      table.dim = d;
    else if (d != table.dim)
      throw Error(Errc::DimMismatch, "expected " + std::to_string(table.dim) + " components, got " + std::to_string(d),
                  ln + 1);
    DenseVector v(d);
    for (std::size_t k = 0; k < d; ++k)
      if (!detail::parse_real(parts[k + 1], v[k]))
        throw Error(Errc::ParseError, "non-numeric component '" + std::string(parts[k + 1]) + "'", ln + 1, "line");
    table.vectors.try_emplace(std::string(parts[0]), std::move(v));
  }
  return table;
}

inline EmbeddingTable load_glove(const std::filesystem::path& path) { return parse_glove(read_file(path)); }

/// Mean of the in-table token vectors; the zero vector when none is known.
inline DenseVector average_embedding(const EmbeddingTable& table, const std::vector<std::string>& tokens) {
  if (table.dim == 0) throw Error(Errc::EmptyInput, "embedding table is empty");
  DenseVector mean(table.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& tok : tokens) {
    if (const auto* v = table.find(tok)) {
      for (std::size_t k = 0; k < table.dim; ++k) mean[k] += (*v)[k];
      ++hits;
    }
  }
  if (hits > 0)
    for (auto& x : mean) x /= static_cast<double>(hits);
  return mean;
}

// ---------------------------------------------------------------------------
// Feature hashing

/// 64-bit FNV-1a over the token bytes, seeded, finished with a splitmix step.
inline std::uint64_t hash_token(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

struct HashSlot {
  std::size_t bucket;
  double sign;
};

/// Bucket from one seeded hash, sign from an independently seeded one.
inline HashSlot hash_slot(std::string_view token, std::size_t dim, std::uint64_t seed) {
  const std::uint64_t hb = hash_token(token, seed);
  const std::uint64_t hs = hash_token(token, seed ^ 0x5bd1e9955bd1e995ULL);
  return {static_cast<std::size_t>(hb % dim), (hs >> 63) ? -1.0 : 1.0};
}

inline DenseVector hash_encode_unnormalized(std::string_view text, std::size_t dim, std::uint64_t seed) {
  if (dim < 1) throw Error(Errc::InvalidArgument, "hash dimension must be at least 1");
  DenseVector v(dim, 0.0);
  for (const auto& tok : tokenize(text)) {
    const auto slot = hash_slot(tok, dim, seed);
    v[slot.bucket] += slot.sign;
  }
  return v;
}

/// Signed feature hashing of tokens into `dim` buckets, L2-normalized unless zero.
inline DenseVector hash_encode(std::string_view text, std::size_t dim, std::uint64_t seed) {
  DenseVector v = hash_encode_unnormalized(text, dim, seed);
  const double norm = l2_norm(v);
  if (norm > 0.0)
    for (auto& x : v) x /= norm;
  return v;
}

/// Provider name recorded for hashing-encoder exports; parseable back into
/// the encoder settings so a pipeline can re-encode text.
inline std::string hash_provider_name(std::size_t dim, std::uint64_t seed) {
  return "hash-d" + std::to_string(dim) + "-s" + std::to_string(seed);
}

struct HashSettings {
  std::size_t dim;
  std::uint64_t seed;
};

inline std::optional<HashSettings> parse_hash_provider(std::string_view name) {
  if (!name.starts_with("hash-d")) return std::nullopt;
  name.remove_prefix(6);
  const auto sep = name.find("-s");
  if (sep == std::string_view::npos) return std::nullopt;
  HashSettings s{};
  const auto d = name.substr(0, sep);
  const auto sd = name.substr(sep + 2);
  auto r1 = std::from_chars(d.data(), d.data() + d.size(), s.dim);
  auto r2 = std::from_chars(sd.data(), sd.data() + sd.size(), s.seed);
  if (r1.ec != std::errc() || r1.ptr != d.data() + d.size() || r2.ec != std::errc() ||
      r2.ptr != sd.data() + sd.size() || s.dim == 0)
    return std::nullopt;
  return s;
}

// ---------------------------------------------------------------------------
// Sentence-embedding interchange (JSONL)

struct EmbeddingSet {
  std::string provider;
  std::size_t dim = 0;
  std::vector<std::string> ids;  // file order
  std::unordered_map<std::string, DenseVector> vectors;

  std::size_t size() const { return ids.size(); }
  const DenseVector* find(std::string_view id) const {
    auto it = vectors.find(std::string(id));
    return it == vectors.end() ? nullptr : &it->second;
  }
  void add(std::string id, DenseVector v) {
    if (id.empty()) throw Error(Errc::InvalidArgument, "empty embedding id");
    if (v.size() != dim) throw Error(Errc::DimMismatch, "vector for " + id + " has wrong length");
    if (!vectors.try_emplace(id, std::move(v)).second) throw Error(Errc::DuplicateId, id);
    ids.push_back(std::move(id));
  }
};

/// Header line `{"provider": ..., "dim": ...}`, then one `{"id": ..., "vec": [...]}`
/// per line. Line numbers in errors are 1-based.
inline EmbeddingSet parse_embeddings(std::string_view content) {
  const auto lines = split_lines(content);
  EmbeddingSet set;
  bool have_header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (lines[ln].find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[ln]);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, e.what(), ln + 1, "line");
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("provider") || !j.contains("dim") || !j["dim"].is_number_unsigned())
        throw Error(Errc::MissingHeader, "first line must declare provider and dim", ln + 1, "line");
      set.provider = j["provider"].get<std::string>();
      set.dim = j["dim"].get<std::size_t>();
      if (set.dim == 0) throw Error(Errc::MissingHeader, "dim must be positive", ln + 1, "line");
      have_header = true;
      continue;
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("vec") || !j["vec"].is_array())
      throw Error(Errc::ParseError, "row needs string id and array vec", ln + 1, "line");
    auto id = j["id"].get<std::string>();
    if (id.empty()) throw Error(Errc::ParseError, "empty id", ln + 1, "line");
    const auto& arr = j["vec"];
    if (arr.size() != set.dim)
      throw Error(Errc::DimMismatch,
                  "expected " + std::to_string(set.dim) + " values, got " + std::to_string(arr.size()), ln + 1, "line");
    DenseVector v;
    v.reserve(set.dim);
    for (const auto& x : arr) {
      if (!x.is_number()) throw Error(Errc::ParseError, "non-numeric vector component", ln + 1, "line");
      v.push_back(x.get<double>());
      if (!std::isfinite(v.back())) throw Error(Errc::ParseError, "non-finite vector component", ln + 1, "line");
    }
    if (set.vectors.contains(id)) throw Error(Errc::DuplicateId, id, ln + 1, "line");
    set.add(std::move(id), std::move(v));
  }
  if (!have_header) throw Error(Errc::MissingHeader, "embedding file is empty");
  return set;
}

inline EmbeddingSet load_embeddings(const std::filesystem::path& path) { return parse_embeddings(read_file(path)); }

inline std::string format_embeddings(const EmbeddingSet& set) {
  std::string out = nlohmann::json{{"provider", set.provider}, {"dim", set.dim}}.dump() + "\n";
  for (const auto& id : set.ids) out += nlohmann::json{{"id", id}, {"vec", set.vectors.at(id)}}.dump() + "\n";
  return out;
}

inline void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
  atomic_write(path, format_embeddings(set));
}

// ---------------------------------------------------------------------------
// Fusion

/// Concatenation [a | b].
inline DenseVector fuse(const DenseVector& a, const DenseVector& b) {
  if (a.empty() || b.empty()) throw Error(Errc::ShapeMismatch, "fuse needs non-empty vectors");
  DenseVector out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace emomis
