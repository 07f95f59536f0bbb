#pragma once

#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "emomis/error.hpp"

namespace emomis {

/// Rows are gold classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t n_classes = 0) : n_(n_classes), counts_(n_classes * n_classes, 0) {}

  std::size_t n_classes() const { return n_; }
  std::size_t operator()(std::size_t gold, std::size_t pred) const { return counts_[gold * n_ + pred]; }
  std::size_t& at(std::size_t gold, std::size_t pred) { return counts_[gold * n_ + pred]; }

  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }
  std::size_t row_sum(std::size_t gold) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += (*this)(gold, p);
    return s;
  }
  std::size_t col_sum(std::size_t pred) const {
    std::size_t s = 0;
    for (std::size_t g = 0; g < n_; ++g) s += (*this)(g, pred);
    return s;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> golds, std::span<const std::size_t> preds,
                                 std::size_t n_classes) {
  if (golds.size() != preds.size())
    throw Error(Errc::LengthMismatch, std::to_string(golds.size()) + " golds vs " + std::to_string(preds.size()) + " preds");
  if (golds.empty()) throw Error(Errc::LengthMismatch, "no examples to score");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] >= n_classes || preds[i] >= n_classes)
      throw Error(Errc::CodeOutOfRange, "class code out of range", i, "index");
    ++cm.at(golds[i], preds[i]);
  }
  return cm;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  bool operator==(const ClassMetrics&) const = default;
};

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const Averages&) const = default;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  Averages macro;
  Averages weighted;
  bool operator==(const MetricsReport&) const = default;
};

/// 0/0 reads as 0.
inline double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

/// Per-class precision/recall/F1 plus unweighted (macro) and support-weighted
/// means. Weighted F1 is the support-weighted mean of per-class F1.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(Errc::EmptyMatrix, "confusion matrix has no counts");
  const std::size_t n = cm.n_classes();
  MetricsReport r;
  r.per_class.resize(n);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const auto tp = static_cast<double>(cm(c, c));
    auto& m = r.per_class[c];
    m.support = cm.row_sum(c);
    m.precision = safe_ratio(tp, static_cast<double>(cm.col_sum(c)));
    m.recall = safe_ratio(tp, static_cast<double>(m.support));
    m.f1 = safe_ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    trace += cm(c, c);
  }
  const double t = static_cast<double>(total);
  r.accuracy = static_cast<double>(trace) / t;
  for (const auto& m : r.per_class) {
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    const double w = static_cast<double>(m.support);
    r.weighted.precision += w * m.precision;
    r.weighted.f1 += w * m.f1;
  }
  r.weighted.precision /= t;
  r.weighted.f1 /= t;
  r.macro.precision /= static_cast<double>(n);
  r.macro.recall /= static_cast<double>(n);
  r.macro.f1 /= static_cast<double>(n);
  // sum_c (support_c / total) * (tp_c / support_c) telescopes to trace / total.
  r.weighted.recall = r.accuracy;
  return r;
}

// ---------------------------------------------------------------------------
// Rendering

enum class ReportFormat { Markdown, Json };

/// Half-up rounding to two decimals. The 1e-9 nudge keeps values such as
/// 0.125 (stored as 0.12499999...) rounding up as printed.
inline std::string format_cell(double v) {
  const double r = std::floor(v * 100.0 + 0.5 + 1e-9) / 100.0;
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

inline nlohmann::json report_to_json(const MetricsReport& r, std::span<const std::string> labels) {
  if (labels.size() != r.per_class.size())
    throw Error(Errc::LabelCountMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(r.per_class.size()) + " classes");
  auto per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class.push_back(
        {{"label", labels[c]}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
  }
  auto avg = [](const Averages& a) { return nlohmann::json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}}; };
  return {{"per_class", per_class}, {"accuracy", r.accuracy}, {"macro", avg(r.macro)}, {"weighted", avg(r.weighted)}};
}

struct LabeledReport {
  MetricsReport report;
  std::vector<std::string> labels;
};

inline LabeledReport report_from_json(const nlohmann::json& j) {
  try {
    LabeledReport out;
    for (const auto& c : j.at("per_class")) {
      out.labels.push_back(c.at("label").get<std::string>());
      out.report.per_class.push_back({c.at("precision").get<double>(), c.at("recall").get<double>(),
                                      c.at("f1").get<double>(), c.at("support").get<std::size_t>()});
    }
    out.report.accuracy = j.at("accuracy").get<double>();
    auto avg = [](const nlohmann::json& a) {
      return Averages{a.at("precision").get<double>(), a.at("recall").get<double>(), a.at("f1").get<double>()};
    };
    out.report.macro = avg(j.at("macro"));
    out.report.weighted = avg(j.at("weighted"));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaError, e.what());
  }
}

/// Markdown: one row per metric (Precision, Recall, F1 Score), per-class
/// columns in label order, then Accuracy, Macro avg. and Weighted avg.
/// Accuracy is shown on the F1 row only. JSON: the full-precision report.
inline std::string render_report(const MetricsReport& r, std::span<const std::string> labels, ReportFormat fmt) {
  if (labels.size() != r.per_class.size())
    throw Error(Errc::LabelCountMismatch,
                std::to_string(labels.size()) + " labels for " + std::to_string(r.per_class.size()) + " classes");
  if (fmt == ReportFormat::Json) return report_to_json(r, labels).dump(2) + "\n";

  std::string out = "| Metric |";
  for (const auto& l : labels) out += " " + l + " |";
  out += " Accuracy | Macro avg. | Weighted avg. |\n|---|";
  for (std::size_t k = 0; k < labels.size() + 3; ++k) out += "---|";
  out += "\n";
  auto row = [&](const char* name, double ClassMetrics::*cf, double Averages::*af, bool with_accuracy) {
    out += std::string("| ") + name + " |";
    for (const auto& m : r.per_class) out += " " + format_cell(m.*cf) + " |";
    out += with_accuracy ? " " + format_cell(r.accuracy) + " |" : std::string(" - |");
    out += " " + format_cell(r.macro.*af) + " | " + format_cell(r.weighted.*af) + " |\n";
  };
  row("Precision", &ClassMetrics::precision, &Averages::precision, false);
  row("Recall", &ClassMetrics::recall, &Averages::recall, false);
  row("F1 Score", &ClassMetrics::f1, &Averages::f1, true);
  return out;
}

}  // namespace emomis
