#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "emomis/corpus.hpp"
#include "emomis/features.hpp"
#include "emomis/rng.hpp"

namespace emomis::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "emomis") {
    static std::uint64_t counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Corpus make_corpus(std::size_t n, std::uint64_t seed = 1) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    TweetRecord r;
    r.id = "t" + std::to_string(i);
    r.raw_text = "tweet number " + std::to_string(i);
    r.misinfo = static_cast<MisinfoLabel>(rng.below(kMisinfoClasses));
    c.records.push_back(std::move(r));
  }
  return c;
}

/// Keyword vocabulary that makes each misinfo class separable by one word.
inline const std::vector<std::string>& class_keywords() {
  static const std::vector<std::string> k = {"officials", "debunked", "rumor", "cure", "bioweapon"};
  return k;
}

/// Tweets whose class is announced by a keyword, padded with shared filler
/// words, mentions and links. Labels cycle so every class is present.
inline Corpus keyword_corpus(std::size_t n, std::uint64_t seed = 11) {
  static const std::vector<std::string> filler = {"coronavirus", "today", "people", "news", "covid",
                                                  "update", "world", "health", "report", "week"};
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % kMisinfoClasses;
    std::string text = "@user" + std::to_string(rng.below(50)) + " ";
    for (int w = 0; w < 4; ++w) text += filler[rng.below(filler.size())] + " ";
    text += class_keywords()[label] + " ";
    for (int w = 0; w < 2; ++w) text += filler[rng.below(filler.size())] + " ";
    text += "https://t.co/x" + std::to_string(i);
    TweetRecord r;
    r.id = "k" + std::to_string(i);
    r.raw_text = text;
    r.misinfo = static_cast<MisinfoLabel>(label);
    c.records.push_back(std::move(r));
  }
  return c;
}

/// GloVe-format text giving every fixture word a random vector, with the
/// class keywords placed far apart.
inline std::string keyword_glove(std::size_t dim, std::uint64_t seed = 5) {
  static const std::vector<std::string> filler = {"coronavirus", "today", "people", "news", "covid",
                                                  "update", "world", "health", "report", "week", "tweet", "number"};
  Rng rng(seed);
  std::string out;
  auto line = [&](const std::string& w, const std::vector<double>& v) {
    out += w;
    for (double x : v) out += " " + std::to_string(x);
    out += "\n";
  };
  for (const auto& w : filler) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-0.1, 0.1);
    line(w, v);
  }
  const auto& kw = class_keywords();
  for (std::size_t k = 0; k < kw.size(); ++k) {
    std::vector<double> v(dim, 0.0);
    v[k % dim] = 3.0;
    line(kw[k], v);
  }
  return out;
}

/// Paths of a written fusion fixture.
struct FusionFixture {
  std::filesystem::path corpus, channel_a, channel_b;
};

/// Two embedding channels, each planting one random bit (sign of coordinate
/// 0, plus noise everywhere). The misinfo label is real news when the bits
/// agree and refutes when they differ, so neither channel alone says
/// anything about the label.
inline FusionFixture write_xor_fusion(const std::filesystem::path& dir, std::size_t n, std::uint64_t seed,
                                      std::size_t dim = 8, double noise = 0.3) {
  Rng rng(seed);
  Corpus c;
  EmbeddingSet a, b;
  a.provider = "planted-a";
  b.provider = "planted-b";
  a.dim = b.dim = dim;
  for (std::size_t i = 0; i < n; ++i) {
    const bool bit_a = rng.below(2) == 1, bit_b = rng.below(2) == 1;
    TweetRecord r;
    r.id = "x" + std::to_string(i);
    r.raw_text = "fixture tweet " + std::to_string(i);
    r.misinfo = bit_a == bit_b ? MisinfoLabel::RealNews : MisinfoLabel::Refutes;
    DenseVector va(dim), vb(dim);
    for (auto& v : va) v = noise * rng.normal();
    for (auto& v : vb) v = noise * rng.normal();
    va[0] += bit_a ? 1.0 : -1.0;
    vb[0] += bit_b ? 1.0 : -1.0;
    a.add(r.id, va);
    b.add(r.id, vb);
    c.records.push_back(std::move(r));
  }
  FusionFixture f{dir / "xor.csv", dir / "a.jsonl", dir / "b.jsonl"};
  save_corpus(c, f.corpus);
  save_embeddings(a, f.channel_a);
  save_embeddings(b, f.channel_b);
  return f;
}

}  // namespace emomis::testing
