#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "emomis/csv.hpp"
#include "emomis/error.hpp"
#include "emomis/io.hpp"
#include "emomis/rng.hpp"

namespace emomis {

// ---------------------------------------------------------------------------
// Labels

/// Misinformation severity. Integer codes are stable and index every
/// per-class array in the library.
enum class MisinfoLabel : std::uint8_t { RealNews = 0, Refutes = 1, Other = 2, PossiblySevere = 3, HighlySevere = 4 };
inline constexpr std::size_t kMisinfoClasses = 5;

enum class EmotionLabel : std::uint8_t { Anger = 0, Disgust, Fear, Joy, Neutral, Sadness, Surprise };
inline constexpr std::size_t kEmotionClasses = 7;

inline constexpr std::array<std::string_view, kMisinfoClasses> kMisinfoCanonical = {
    "real news/claims", "refutes/rebuts", "other", "possibly severe", "highly severe"};
inline constexpr std::array<std::string_view, kMisinfoClasses> kMisinfoDisplay = {
    "Real News/Claims", "Refutes/Rebuts", "Other", "Possibly severe", "Highly severe"};
inline constexpr std::array<std::string_view, kEmotionClasses> kEmotionCanonical = {
    "anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"};

inline std::size_t code(MisinfoLabel l) { return static_cast<std::size_t>(l); }
inline std::size_t code(EmotionLabel l) { return static_cast<std::size_t>(l); }

inline std::string_view canonical(MisinfoLabel l) { return kMisinfoCanonical[code(l)]; }
inline std::string_view display(MisinfoLabel l) { return kMisinfoDisplay[code(l)]; }
inline std::string_view canonical(EmotionLabel l) { return kEmotionCanonical[code(l)]; }

namespace detail {
inline std::string lower_trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace detail

/// Case-insensitive lookup of the canonical name.
inline std::optional<MisinfoLabel> parse_misinfo(std::string_view s) {
  const auto key = detail::lower_trim(s);
  for (std::size_t i = 0; i < kMisinfoClasses; ++i)
    if (key == kMisinfoCanonical[i]) return static_cast<MisinfoLabel>(i);
  return std::nullopt;
}

inline std::optional<EmotionLabel> parse_emotion(std::string_view s) {
  const auto key = detail::lower_trim(s);
  for (std::size_t i = 0; i < kEmotionClasses; ++i)
    if (key == kEmotionCanonical[i]) return static_cast<EmotionLabel>(i);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Records

struct TweetRecord {
  std::string id;
  std::string raw_text;
  std::optional<std::string> clean_text;
  std::optional<MisinfoLabel> misinfo;
  std::optional<EmotionLabel> emotion;

  bool operator==(const TweetRecord&) const = default;
};

struct Corpus {
  std::vector<TweetRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  auto begin() const { return records.begin(); }
  auto end() const { return records.end(); }

  bool operator==(const Corpus&) const = default;
};

// ---------------------------------------------------------------------------
// Cleaning

namespace detail {

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
inline bool is_word(unsigned char c) { return std::isalnum(c) || c == '_'; }

/// One pass: drop URLs and @-mentions, strip '#', collapse whitespace.
inline std::string clean_once(std::string_view text) {
  std::string stripped;
  stripped.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto rest = text.substr(i);
    const std::size_t scheme = rest.starts_with("https://") ? 8 : rest.starts_with("http://") ? 7 : 0;
    if (scheme && scheme < rest.size() && !is_space(static_cast<unsigned char>(rest[scheme]))) {
      i += scheme;
      while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
      continue;
    }
    if (text[i] == '@' && i + 1 < text.size() && is_word(static_cast<unsigned char>(text[i + 1]))) {
      ++i;
      while (i < text.size() && is_word(static_cast<unsigned char>(text[i]))) ++i;
      continue;
    }
    if (text[i] != '#') stripped += text[i];
    ++i;
  }

  std::string out;
  out.reserve(stripped.size());
  bool pending_space = false;
  for (char c : stripped) {
    if (is_space(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out += ' ';
      pending_space = false;
      out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Removes @-mentions ('@' + word characters) and scheme-prefixed URLs,
/// strips '#' while keeping the hashtag word, collapses whitespace runs and
/// trims. Removal can splice text into a new match ("http@x://y"), so the pass
/// repeats to a fixed point; the result is idempotent. Non-ASCII bytes pass
/// through untouched.
inline std::string clean_tweet(std::string_view text) {
  std::string current = detail::clean_once(text);
  for (;;) {
    std::string next = detail::clean_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

/// The text models should see: the stored clean text, or a fresh cleaning.
inline std::string cleaned_text(const TweetRecord& r) { return r.clean_text ? *r.clean_text : clean_tweet(r.raw_text); }

// ---------------------------------------------------------------------------
// CSV persistence

/// Parses the corpus CSV. Required columns: id, text. Optional: misinfo,
/// emotion, clean_text. Row numbers in errors count data rows from 1.
inline Corpus parse_corpus(std::string_view content) {
  const auto records = csv::parse(content);
  if (records.empty()) throw Error(Errc::MissingHeader, "corpus file has no header row");
  const auto& header = records.front().fields;
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < header.size(); ++k) column.emplace(detail::lower_trim(header[k]), k);
  auto find = [&](const char* name) -> std::optional<std::size_t> {
    auto it = column.find(name);
    if (it == column.end()) return std::nullopt;
    return it->second;
  };
  const auto id_col = find("id");
  const auto text_col = find("text");
  if (!id_col || !text_col) throw Error(Errc::MissingHeader, "corpus header needs id and text columns");
  const auto misinfo_col = find("misinfo");
  const auto emotion_col = find("emotion");
  const auto clean_col = find("clean_text");

  Corpus corpus;
  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& fields = records[r].fields;
    const std::size_t row = r;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw Error(Errc::MalformedRow,
                  "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()), row);
    TweetRecord rec;
    rec.id = fields[*id_col];
    if (rec.id.empty()) throw Error(Errc::MalformedRow, "empty id", row);
    rec.raw_text = fields[*text_col];
    if (misinfo_col && !fields[*misinfo_col].empty()) {
      rec.misinfo = parse_misinfo(fields[*misinfo_col]);
      if (!rec.misinfo) throw Error(Errc::UnknownLabel, fields[*misinfo_col], row);
    }
    if (emotion_col && !fields[*emotion_col].empty()) {
      rec.emotion = parse_emotion(fields[*emotion_col]);
      if (!rec.emotion) throw Error(Errc::UnknownLabel, fields[*emotion_col], row);
    }
    if (clean_col && !fields[*clean_col].empty()) rec.clean_text = fields[*clean_col];
    if (!seen.insert(rec.id).second) throw Error(Errc::DuplicateId, rec.id, row);
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

/// Serializes with columns id,text,misinfo,emotion and, when any record
/// carries one, clean_text.
inline std::string format_corpus(const Corpus& corpus, bool force_clean_column = false) {
  const bool with_clean = force_clean_column || std::any_of(corpus.begin(), corpus.end(),
                                                            [](const TweetRecord& r) { return r.clean_text.has_value(); });
  std::string out;
  std::vector<std::string> header = {"id", "text", "misinfo", "emotion"};
  if (with_clean) header.emplace_back("clean_text");
  csv::append_row(out, header);
  for (const auto& r : corpus) {
    std::vector<std::string> row = {r.id, r.raw_text, r.misinfo ? std::string(canonical(*r.misinfo)) : std::string(),
                                    r.emotion ? std::string(canonical(*r.emotion)) : std::string()};
    if (with_clean) row.push_back(r.clean_text.value_or(""));
    csv::append_row(out, row);
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path, bool force_clean_column = false) {
  atomic_write(path, format_corpus(corpus, force_clean_column));
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = false;
};

struct SplitResult {
  Corpus train;
  Corpus test;
};

inline std::size_t round_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

/// Fisher-Yates shuffle with the portable generator, then a prefix cut.
/// Stratified mode shuffles and cuts each misinfo class (unlabeled records
/// form their own group) independently, one generator shared across groups
/// in label-code order.
inline SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "train_fraction must lie in (0, 1)");
  if (corpus.empty()) throw Error(Errc::EmptyCorpus, "cannot split an empty corpus");

  Rng rng(spec.seed);
  SplitResult out;
  auto take = [&](std::vector<std::size_t>& idx) {
    shuffle(std::span(idx), rng);
    const std::size_t n_train = round_count(spec.train_fraction, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k)
      (k < n_train ? out.train : out.test).records.push_back(corpus.records[idx[k]]);
  };

  if (!spec.stratified) {
    std::vector<std::size_t> idx(corpus.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    take(idx);
    return out;
  }
  std::array<std::vector<std::size_t>, kMisinfoClasses + 1> groups;
  for (std::size_t k = 0; k < corpus.size(); ++k) {
    const auto& m = corpus.records[k].misinfo;
    groups[m ? code(*m) : kMisinfoClasses].push_back(k);
  }
  for (auto& g : groups) take(g);
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct LabelCounts {
  std::array<std::size_t, kMisinfoClasses> per_label{};
  std::size_t unlabeled = 0;
  std::size_t total = 0;

  std::size_t operator[](MisinfoLabel l) const { return per_label[code(l)]; }
  bool operator==(const LabelCounts&) const = default;
};

inline LabelCounts corpus_stats(const Corpus& corpus) {
  LabelCounts c;
  for (const auto& r : corpus) {
    if (r.misinfo)
      ++c.per_label[code(*r.misinfo)];
    else
      ++c.unlabeled;
    ++c.total;
  }
  return c;
}

/// Markdown table in the dataset-statistics layout (severity rows first,
/// real news last, then Total). Each column is one named count table.
inline std::string render_stats(const std::vector<std::pair<std::string, LabelCounts>>& columns) {
  static constexpr std::array<MisinfoLabel, kMisinfoClasses> kRowOrder = {
      MisinfoLabel::PossiblySevere, MisinfoLabel::HighlySevere, MisinfoLabel::Refutes, MisinfoLabel::Other,
      MisinfoLabel::RealNews};
  std::string out = "| Category |";
  for (const auto& [name, _] : columns) out += " " + name + " |";
  out += "\n|---|";
  for (std::size_t k = 0; k < columns.size(); ++k) out += "---|";
  out += "\n";
  for (auto label : kRowOrder) {
    out += "| " + std::string(display(label)) + " |";
    for (const auto& [_, counts] : columns) out += " " + std::to_string(counts[label]) + " |";
    out += "\n";
  }
  const bool any_unlabeled =
      std::any_of(columns.begin(), columns.end(), [](const auto& c) { return c.second.unlabeled > 0; });
  if (any_unlabeled) {
    out += "| Unlabeled |";
    for (const auto& [_, counts] : columns) out += " " + std::to_string(counts.unlabeled) + " |";
    out += "\n";
  }
  out += "| Total |";
  for (const auto& [_, counts] : columns) out += " " + std::to_string(counts.total) + " |";
  out += "\n";
  return out;
}

}  // namespace emomis
