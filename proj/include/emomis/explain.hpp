#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "emomis/corpus.hpp"
#include "emomis/csv.hpp"
#include "emomis/features.hpp"
#include "emomis/io.hpp"
#include "emomis/models/mlp.hpp"
#include "emomis/rng.hpp"

namespace emomis {

// ---------------------------------------------------------------------------
// Occlusion attribution

/// Anything that maps cleaned text to a class distribution.
template <typename P>
concept TextClassifier = requires(const P& p, std::string_view text) {
  { p.predict_proba(text) } -> std::convertible_to<std::vector<double>>;
};

struct AttributionRecord {
  std::string token;
  std::size_t token_index = 0;
  std::size_t cls = 0;
  double score = 0.0;  // > 0: the token raises P(cls)
  bool operator==(const AttributionRecord&) const = default;
};

/// score(i, c) = P(c | all tokens) - P(c | all tokens but i). The text is
/// cleaned and tokenized first; both evaluations see space-joined tokens.
/// Records are ordered by token position, then by the order of `classes`.
template <TextClassifier P>
std::vector<AttributionRecord> occlusion_attribution(const P& pipeline, std::string_view text,
                                                     std::span<const std::size_t> classes) {
  const auto tokens = tokenize(clean_tweet(text));
  if (tokens.empty()) throw Error(Errc::EmptyAfterCleaning, "no tokens left after cleaning");
  const std::vector<double> full = pipeline.predict_proba(join_tokens(tokens));
  for (auto c : classes)
    if (c >= full.size()) throw Error(Errc::CodeOutOfRange, "class " + std::to_string(c) + " out of range");
  std::vector<AttributionRecord> out;
  out.reserve(tokens.size() * classes.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::vector<double> reduced = pipeline.predict_proba(join_tokens(tokens, i));
    for (auto c : classes) out.push_back({tokens[i], i, c, full[c] - reduced[c]});
  }
  return out;
}

template <TextClassifier P>
std::vector<AttributionRecord> occlusion_attribution(const P& pipeline, std::string_view text, std::size_t cls) {
  const std::size_t one[] = {cls};
  return occlusion_attribution(pipeline, text, std::span<const std::size_t>(one));
}

inline nlohmann::json attribution_to_json(std::span<const AttributionRecord> records,
                                          std::span<const std::string> class_names = {}) {
  auto arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j = {{"token", r.token}, {"token_index", r.token_index}, {"class", r.cls}, {"score", r.score}};
    if (r.cls < class_names.size()) j["label"] = class_names[r.cls];
    arr.push_back(std::move(j));
  }
  return arr;
}

/// One line per class: tokens on a green (positive) or red (negative) 256-color
/// background, four intensity steps by |score| quartile within that class.
inline std::string render_attribution_ansi(std::span<const AttributionRecord> records,
                                           std::span<const std::string> class_names) {
  static constexpr int kGreen[] = {22, 28, 34, 40};
  static constexpr int kRed[] = {52, 88, 124, 160};
  std::vector<std::size_t> classes;
  for (const auto& r : records)
    if (std::find(classes.begin(), classes.end(), r.cls) == classes.end()) classes.push_back(r.cls);
  std::string out;
  for (auto c : classes) {
    std::vector<double> mags;
    for (const auto& r : records)
      if (r.cls == c) mags.push_back(std::abs(r.score));
    std::sort(mags.begin(), mags.end());
    auto quantile = [&](double q) { return mags[static_cast<std::size_t>(q * static_cast<double>(mags.size() - 1))]; };
    const double q1 = quantile(0.25), q2 = quantile(0.5), q3 = quantile(0.75);
    out += (c < class_names.size() ? class_names[c] : std::to_string(c)) + ":";
    for (const auto& r : records) {
      if (r.cls != c) continue;
      const double m = std::abs(r.score);
      const int bucket = m <= q1 ? 0 : m <= q2 ? 1 : m <= q3 ? 2 : 3;
      out += ' ';
      if (r.score == 0.0) {
        out += r.token;
      } else {
        out += "\x1b[48;5;" + std::to_string(r.score > 0 ? kGreen[bucket] : kRed[bucket]) + "m" + r.token + "\x1b[0m";
      }
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient x input

/// score_d = (d logit[cls] / d x_d) * x_d.
inline std::vector<double> gradient_input_attribution(const Mlp& mlp, const DenseVector& x, std::size_t cls) {
  if (x.size() != mlp.dim()) throw Error(Errc::ShapeMismatch, "input dim does not match model");
  auto g = mlp.input_gradient(x, cls);
  for (std::size_t d = 0; d < g.size(); ++d) g[d] *= x[d];
  return g;
}

// ---------------------------------------------------------------------------
// PCA projection

struct ProjectedPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  std::optional<MisinfoLabel> label;
  bool operator==(const ProjectedPoint&) const = default;
};

struct Projection2D {
  std::vector<ProjectedPoint> points;
};

struct PcaResult {
  Projection2D projection;
  DenseVector mean;
  std::array<DenseVector, 2> components;
  std::array<double, 2> variances{};  // along each component
  double total_variance = 0.0;        // trace of the covariance
  std::array<std::size_t, 2> iterations{};
};

struct PcaOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000;
  std::uint64_t seed = 0x5EED;
};

namespace detail {

/// y = C v with C = Xc^T Xc / (n - 1), never materialized.
inline DenseVector covariance_times(const std::vector<DenseVector>& centered, const DenseVector& v) {
  DenseVector y(v.size(), 0.0);
  for (const auto& row : centered) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += row[j] * v[j];
    for (std::size_t j = 0; j < v.size(); ++j) y[j] += s * row[j];
  }
  const double denom = static_cast<double>(centered.size() - 1);
  for (auto& x : y) x /= denom;
  return y;
}

inline double dot(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline void normalize(DenseVector& v) {
  const double n = l2_norm(v);
  for (auto& x : v) x /= n;
}

inline void orthogonalize(DenseVector& v, const DenseVector& against) {
  const double p = dot(v, against);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] -= p * against[j];
}

inline void fix_sign(DenseVector& v) {
  std::size_t big = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (std::abs(v[j]) > std::abs(v[big])) big = j;
  if (v[big] < 0)
    for (auto& x : v) x = -x;
}

}  // namespace detail

/// Mean-centers, then finds the top two covariance eigenvectors by power
/// iteration, the second on the Hotelling-deflated operator C - l1 c1 c1^T.
/// Each component is sign-fixed so its largest-magnitude entry is positive.
inline PcaResult pca_fit(const std::vector<DenseVector>& vectors, const PcaOptions& opt = {}) {
  if (vectors.size() < 3) throw Error(Errc::TooFewPoints, "need at least 3 points");
  const std::size_t dim = vectors.front().size();
  if (dim < 2) throw Error(Errc::ShapeMismatch, "need dimension of at least 2");
  for (const auto& v : vectors)
    if (v.size() != dim) throw Error(Errc::ShapeMismatch, "vectors differ in dimension");

  PcaResult r;
  r.mean.assign(dim, 0.0);
  for (const auto& v : vectors)
    for (std::size_t j = 0; j < dim; ++j) r.mean[j] += v[j];
  for (auto& m : r.mean) m /= static_cast<double>(vectors.size());

  std::vector<DenseVector> centered;
  centered.reserve(vectors.size());
  bool identical = true;
  double scale = 0.0;
  for (const auto& v : vectors) {
    DenseVector c(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      c[j] = v[j] - r.mean[j];
      scale = std::max(scale, std::abs(v[j]));
    }
    if (v != vectors.front()) identical = false;
    r.total_variance += detail::dot(c, c);
    centered.push_back(std::move(c));
  }
  r.total_variance /= static_cast<double>(vectors.size() - 1);
  if (identical || r.total_variance <= 1e-28 * (1.0 + scale * scale))
    throw Error(Errc::DegenerateData, "data has zero total variance");

  Rng rng(opt.seed);
  for (std::size_t k = 0; k < 2; ++k) {
    DenseVector v(dim);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    if (k == 1) detail::orthogonalize(v, r.components[0]);
    detail::normalize(v);
    std::size_t it = 0;
    for (; it < opt.max_iterations; ++it) {
      DenseVector w = detail::covariance_times(centered, v);
      if (k == 1) {
        const double p = detail::dot(r.components[0], v);
        for (std::size_t j = 0; j < dim; ++j) w[j] -= r.variances[0] * p * r.components[0][j];
        detail::orthogonalize(w, r.components[0]);
      }
      const double norm = l2_norm(w);
      if (norm <= 1e-300) break;  // v spans the null space; eigenvalue 0
      for (auto& x : w) x /= norm;
      double diff_same = 0.0, diff_flip = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        diff_same += (w[j] - v[j]) * (w[j] - v[j]);
        diff_flip += (w[j] + v[j]) * (w[j] + v[j]);
      }
      v = std::move(w);
      if (std::sqrt(std::min(diff_same, diff_flip)) < opt.tolerance) {
        ++it;
        break;
      }
    }
    if (k == 1) {
      detail::orthogonalize(v, r.components[0]);
      detail::normalize(v);
    }
    detail::fix_sign(v);
    r.iterations[k] = it;
    r.variances[k] = std::max(0.0, detail::dot(v, detail::covariance_times(centered, v)));
    r.components[k] = std::move(v);
  }

  r.projection.points.reserve(centered.size());
  for (const auto& c : centered)
    r.projection.points.push_back({"", detail::dot(c, r.components[0]), detail::dot(c, r.components[1]), std::nullopt});
  return r;
}

/// Projects labeled vectors; ids must be unique.
inline Projection2D pca_project(const std::vector<DenseVector>& vectors, const std::vector<std::string>& ids,
                                const std::vector<std::optional<MisinfoLabel>>& labels, const PcaOptions& opt = {}) {
  if (ids.size() != vectors.size() || labels.size() != vectors.size())
    throw Error(Errc::LengthMismatch, "vectors, ids and labels must align");
  std::unordered_set<std::string> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) throw Error(Errc::DuplicateId, id);
  auto r = pca_fit(vectors, opt);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    r.projection.points[i].id = ids[i];
    r.projection.points[i].label = labels[i];
  }
  return std::move(r.projection);
}

/// `id,x,y,label` with round-trip precision and canonical label strings.
inline std::string format_plot_csv(const Projection2D& p) {
  std::string out = "id,x,y,label\n";
  for (const auto& pt : p.points)
    csv::append_row(out, {pt.id, format_double(pt.x), format_double(pt.y),
                          pt.label ? std::string(canonical(*pt.label)) : std::string()});
  return out;
}

inline void emit_plot_csv(const Projection2D& p, const std::filesystem::path& path) {
  atomic_write(path, format_plot_csv(p));
}

inline Projection2D parse_plot_csv(std::string_view text) {
  Projection2D p;
  const auto records = csv::parse(text);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    if (f.size() != 4) throw Error(Errc::MalformedRow, "expected 4 fields", r);
    ProjectedPoint pt;
    pt.id = f[0];
    if (!detail::parse_real(f[1], pt.x) || !detail::parse_real(f[2], pt.y))
      throw Error(Errc::ParseError, "bad coordinate", r);
    if (!f[3].empty()) {
      pt.label = parse_misinfo(f[3]);
      if (!pt.label) throw Error(Errc::UnknownLabel, f[3], r);
    }
    p.points.push_back(std::move(pt));
  }
  return p;
}

}  // namespace emomis
