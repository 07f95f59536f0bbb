#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "emomis/corpus.hpp"
#include "emomis/csv.hpp"
#include "emomis/error.hpp"
#include "emomis/io.hpp"
#include "emomis/rng.hpp"

namespace emomis {

struct Annotation {
  std::string tweet_id;
  std::string annotator_id;
  EmotionLabel label = EmotionLabel::Neutral;
  std::int64_t timestamp = 0;  // UTC seconds
  bool operator==(const Annotation&) const = default;
};

inline constexpr std::string_view kStoreHeader = "tweet_id,annotator_id,emotion,timestamp\n";

/// Append-only CSV of annotations, one line per answer.
class AnnotationStore {
 public:
  /// A missing file is an empty store. A final line without a newline is a
  /// torn append (its timestamp may be cut short) and is dropped.
  static AnnotationStore load(const std::filesystem::path& path) {
    AnnotationStore store;
    if (!std::filesystem::exists(path)) return store;
    auto text = read_file(path);
    text.resize(complete_length(text));
    const auto records = csv::parse(text);
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& f = records[r].fields;
      if (f.size() == 1 && f[0].empty()) continue;
      if (f.size() != 4) throw Error(Errc::MalformedRow, "expected 4 fields", r);
      const auto label = parse_emotion(f[2]);
      if (!label) throw Error(Errc::MalformedRow, "unknown emotion '" + f[2] + "'", r);
      std::int64_t ts = 0;
      auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), ts);
      if (ec != std::errc() || ptr != f[3].data() + f[3].size() || f[0].empty() || f[1].empty())
        throw Error(Errc::MalformedRow, "bad timestamp or empty id", r);
      store.add({f[0], f[1], *label, ts}, r);
    }
    return store;
  }

  const std::vector<Annotation>& annotations() const { return items_; }
  std::size_t size() const { return items_.size(); }

  bool contains(std::string_view tweet_id, std::string_view annotator_id) const {
    return keys_.contains(key(tweet_id, annotator_id));
  }

  void add(Annotation a, std::optional<std::size_t> row = std::nullopt) {
    if (!keys_.insert(key(a.tweet_id, a.annotator_id)).second)
      throw Error(Errc::DuplicateId, a.tweet_id + " already annotated by " + a.annotator_id, row);
    items_.push_back(std::move(a));
  }

  /// Truncates a torn final line (no trailing newline) left by an interrupted
  /// append, so the next append starts on a fresh line.
  static void repair(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return;
    const auto text = read_file(path);
    const auto keep = complete_length(text);
    if (keep != text.size()) std::filesystem::resize_file(path, keep);
  }

  /// Appends one line with a single write(2) on an O_APPEND descriptor, so a
  /// crash leaves either the whole row or nothing.
  static void append(const std::filesystem::path& path, const Annotation& a) {
    std::string line;
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (fresh) line += kStoreHeader;
    csv::append_row(line, {a.tweet_id, a.annotator_id, std::string(canonical(a.label)), std::to_string(a.timestamp)});
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0) throw Error(Errc::IoError, "cannot open " + path.string());
    const auto written = ::write(fd, line.data(), line.size());
    const bool ok = written == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    if (!ok) throw Error(Errc::IoError, "append failed for " + path.string());
  }

 private:
  /// Length of the prefix that ends in a newline.
  static std::size_t complete_length(std::string_view text) {
    if (text.empty() || text.back() == '\n') return text.size();
    const auto cut = text.rfind('\n');
    return cut == std::string_view::npos ? 0 : cut + 1;
  }

  static std::string key(std::string_view t, std::string_view a) {
    std::string k(t);
    k += '\x1f';
    k += a;
    return k;
  }

  std::vector<Annotation> items_;
  std::unordered_set<std::string> keys_;
};

// ---------------------------------------------------------------------------
// Sampling and the terminal session

/// n distinct records in a seeded shuffled order.
inline Corpus sample_for_annotation(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size())
    throw Error(Errc::SampleTooLarge, "asked for " + std::to_string(n) + " of " + std::to_string(corpus.size()));
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  shuffle(std::span(idx), rng);
  Corpus out;
  for (std::size_t k = 0; k < n; ++k) out.records.push_back(corpus.records[idx[k]]);
  return out;
}

using Clock = std::function<std::int64_t()>;

inline std::int64_t utc_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

/// Prompts for every sampled tweet this annotator has not labeled yet and
/// appends each answer immediately. Choices are 1-7; 'q' or end of input
/// stops the session; anything else re-prompts. Returns the number of new
/// annotations.
inline std::size_t run_session(const Corpus& sample, const std::string& annotator_id,
                               const std::filesystem::path& store_path, std::istream& in, std::ostream& out,
                               const Clock& clock = utc_now) {
  if (annotator_id.empty()) throw Error(Errc::InvalidArgument, "annotator id must be non-empty");
  AnnotationStore::repair(store_path);
  const auto store = AnnotationStore::load(store_path);
  std::vector<const TweetRecord*> todo;
  for (const auto& r : sample)
    if (!store.contains(r.id, annotator_id)) todo.push_back(&r);

  out << todo.size() << " of " << sample.size() << " tweets left for " << annotator_id << "\n";
  std::size_t added = 0;
  for (std::size_t k = 0; k < todo.size(); ++k) {
    const auto& rec = *todo[k];
    for (;;) {
      out << "\n[" << (k + 1) << "/" << todo.size() << "] " << rec.id << "\n" << rec.raw_text << "\n";
      for (std::size_t c = 0; c < kEmotionClasses; ++c) out << "  " << (c + 1) << ") " << kEmotionCanonical[c] << "\n";
      out << "choice (1-7, q to quit): " << std::flush;
      std::string line;
      if (!std::getline(in, line)) return added;
      const auto answer = detail::lower_trim(line);
      if (answer == "q") return added;
      if (answer.size() == 1 && answer[0] >= '1' && answer[0] <= '7') {
        const auto label = static_cast<EmotionLabel>(answer[0] - '1');
        AnnotationStore::append(store_path, {rec.id, annotator_id, label, clock()});
        ++added;
        break;
      }
      out << "invalid choice '" << line << "'\n";
    }
  }
  return added;
}

// ---------------------------------------------------------------------------
// Agreement

/// (p_o - p_e) / (1 - p_e) over two equally long code sequences; 1.0 when
/// both raters use one and the same label throughout.
inline double cohen_kappa(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw Error(Errc::LengthMismatch, "label lists differ in length");
  if (a.empty()) throw Error(Errc::EmptyInput, "no labels");
  const double n = static_cast<double>(a.size());
  std::map<std::size_t, std::pair<double, double>> marginals;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) agree += 1.0;
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
  }
  const double p_o = agree / n;
  double p_e = 0.0;
  for (const auto& [_, m] : marginals) p_e += (m.first / n) * (m.second / n);
  if (p_e >= 1.0) return 1.0;
  return (p_o - p_e) / (1.0 - p_e);
}

/// Fleiss' kappa over an items x labels table of rating counts; every item
/// must have the same number r >= 2 of ratings.
inline double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts) {
  if (counts.empty()) throw Error(Errc::EmptyInput, "no items");
  const std::size_t k = counts.front().size();
  std::size_t r = 0;
  for (const auto& row : counts) {
    if (row.size() != k) throw Error(Errc::RaggedTable, "items have different label counts");
    std::size_t s = 0;
    for (auto c : row) s += c;
    if (r == 0) r = s;
    if (s != r) throw Error(Errc::RaggedTable, "items have different rater counts");
  }
  if (r < 2) throw Error(Errc::TooFewRaters, "need at least two ratings per item");
  const double n_items = static_cast<double>(counts.size());
  const double rr = static_cast<double>(r);
  std::vector<double> label_totals(k, 0.0);
  double p_bar = 0.0;
  for (const auto& row : counts) {
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(row[j]);
      sq += c * c;
      label_totals[j] += c;
    }
    p_bar += (sq - rr) / (rr * (rr - 1.0));
  }
  p_bar /= n_items;
  double p_e = 0.0;
  for (double t : label_totals) {
    const double p = t / (n_items * rr);
    p_e += p * p;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

struct PairKappa {
  std::string a;
  std::string b;
  double kappa;
};

struct AgreementStats {
  std::vector<std::string> annotators;  // sorted
  std::vector<std::string> items;       // annotated by everyone, store order
  std::vector<PairKappa> pairwise;
  double mean_pairwise = 0.0;
  double fleiss = 0.0;
  std::array<std::size_t, kEmotionClasses> majority_counts{};  // consensus label per item
};

/// Majority label; ties go to the lowest label code.
inline std::size_t majority_label(std::span<const std::size_t> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[best]) best = c;
  return best;
}

inline AgreementStats agreement_stats(const AnnotationStore& store) {
  AgreementStats s;
  std::set<std::string> annotators;
  for (const auto& a : store.annotations()) annotators.insert(a.annotator_id);
  if (annotators.size() < 2)
    throw Error(Errc::InsufficientAnnotators, "found " + std::to_string(annotators.size()) + " annotator(s)");
  s.annotators.assign(annotators.begin(), annotators.end());

  std::unordered_map<std::string, std::unordered_map<std::string, std::size_t>> by_item;
  std::vector<std::string> item_order;
  for (const auto& a : store.annotations()) {
    auto [it, fresh] = by_item.try_emplace(a.tweet_id);
    if (fresh) item_order.push_back(a.tweet_id);
    it->second[a.annotator_id] = code(a.label);
  }
  for (const auto& id : item_order)
    if (by_item[id].size() == s.annotators.size()) s.items.push_back(id);
  if (s.items.empty()) throw Error(Errc::InsufficientAnnotators, "no tweet was labeled by every annotator");

  std::vector<std::vector<std::size_t>> seqs(s.annotators.size());
  std::vector<std::vector<std::size_t>> table;
  for (const auto& id : s.items) {
    std::vector<std::size_t> row(kEmotionClasses, 0);
    for (std::size_t k = 0; k < s.annotators.size(); ++k) {
      const auto label = by_item[id].at(s.annotators[k]);
      seqs[k].push_back(label);
      ++row[label];
    }
    ++s.majority_counts[majority_label(row)];
    table.push_back(std::move(row));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t j = i + 1; j < seqs.size(); ++j) {
      const double k = cohen_kappa(seqs[i], seqs[j]);
      s.pairwise.push_back({s.annotators[i], s.annotators[j], k});
      sum += k;
    }
  s.mean_pairwise = sum / static_cast<double>(s.pairwise.size());
  s.fleiss = fleiss_kappa(table);
  return s;
}

inline AgreementStats agreement_report(const std::filesystem::path& store_path) {
  return agreement_stats(AnnotationStore::load(store_path));
}

}  // namespace emomis
