#pragma once

// Subcommand implementations behind the `emomis` executable. Each returns a
// process exit code: 0 success, 2 usage or configuration error, 3 data error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emomis/annotate.hpp"
#include "emomis/corpus.hpp"
#include "emomis/eval.hpp"
#include "emomis/explain.hpp"
#include "emomis/features.hpp"
#include "emomis/io.hpp"
#include "emomis/models/model.hpp"
#include "emomis/pipeline.hpp"

namespace emomis {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// Default seed: $EMOMIS_SEED when set and numeric, else 0.
inline std::uint64_t default_seed() {
  if (const char* s = std::getenv("EMOMIS_SEED")) {
    std::uint64_t v = 0;
    const std::string_view sv(s);
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec == std::errc() && ptr == sv.data() + sv.size()) return v;
  }
  return 0;
}

inline int exit_code_for(const Error& e) { return e.code() == Errc::InvalidArgument ? kExitUsage : kExitData; }

/// Runs `body`, turning library errors into a message on `err` and an exit code.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

// ---------------------------------------------------------------------------
// clean / split / stats / embed-hash

inline int cmd_clean(const std::filesystem::path& in, const std::filesystem::path& out, std::ostream& log,
                     std::ostream& err) {
  Corpus corpus;
  try {
    corpus = load_corpus(in);
  } catch (const Error& e) {
    err << "error: " << in.string() << ": " << e.what() << "\n";
    return kExitUsage;
  }
  return guarded(err, [&] {
    for (auto& r : corpus.records) r.clean_text = clean_tweet(r.raw_text);
    save_corpus(corpus, out, true);
    log << "cleaned " << corpus.size() << " rows -> " << out.string() << "\n";
    return kExitOk;
  });
}

inline int cmd_split(const std::filesystem::path& in, const std::filesystem::path& out_dir, const SplitSpec& spec,
                     std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto corpus = load_corpus(in);
    const auto parts = split(corpus, spec);
    std::filesystem::create_directories(out_dir);
    const auto train_text = format_corpus(parts.train);
    const auto test_text = format_corpus(parts.test);
    atomic_write(out_dir / "train.csv", train_text);
    atomic_write(out_dir / "test.csv", test_text);
    log << "train " << parts.train.size() << ", test " << parts.test.size() << "\n";
    return kExitOk;
  });
}

inline int cmd_stats(const std::filesystem::path& in, const std::optional<SplitSpec>& spec, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&] {
    const auto corpus = load_corpus(in);
    std::vector<std::pair<std::string, LabelCounts>> columns = {{"#Tweets", corpus_stats(corpus)}};
    if (spec) {
      const auto parts = split(corpus, *spec);
      columns.emplace_back("Training Set", corpus_stats(parts.train));
      columns.emplace_back("Test Set", corpus_stats(parts.test));
    }
    out << render_stats(columns);
    return kExitOk;
  });
}

inline int cmd_embed_hash(const std::filesystem::path& in, const std::filesystem::path& out, std::size_t dim,
                          std::uint64_t seed, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    if (dim < 1) throw Error(Errc::InvalidArgument, "--dim must be at least 1");
    const auto corpus = load_corpus(in);
    EmbeddingSet set;
    set.provider = hash_provider_name(dim, seed);
    set.dim = dim;
    for (const auto& r : corpus) set.add(r.id, hash_encode(cleaned_text(r), dim, seed));
    save_embeddings(set, out);
    log << "wrote " << set.size() << " vectors (" << set.provider << ") -> " << out.string() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// run

struct RunConfig {
  std::filesystem::path dataset;
  std::string model_kind;  // tfidf-rf | glove-lr | embed-mlp | fused-mlp
  std::vector<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> glove;
  std::filesystem::path output;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  bool stratified = false;
  bool class_weights = false;
  std::string embed_head = "mlp";  // classifier over sentence embeddings: mlp | logreg
  LogRegHyper logreg;
  MlpHyper mlp;
  ForestParams forest;
};

/// Reads a JSON config; absent keys keep their defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  try {
    if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
    if (j.contains("model")) c.model_kind = j["model"].get<std::string>();
    if (j.contains("embeddings"))
      for (const auto& e : j["embeddings"]) c.embeddings.emplace_back(e.get<std::string>());
    if (j.contains("glove")) c.glove = j["glove"].get<std::string>();
    if (j.contains("output")) c.output = j["output"].get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.stratified = j.value("stratified", c.stratified);
    c.class_weights = j.value("class_weights", c.class_weights);
    c.embed_head = j.value("head", c.embed_head);
    if (j.contains("logreg")) {
      const auto& l = j["logreg"];
      c.logreg.learning_rate = l.value("learning_rate", c.logreg.learning_rate);
      c.logreg.epochs = l.value("epochs", c.logreg.epochs);
      c.logreg.l2_penalty = l.value("l2_penalty", c.logreg.l2_penalty);
    }
    if (j.contains("mlp")) {
      const auto& m = j["mlp"];
      c.mlp.hidden_size = m.value("hidden_size", c.mlp.hidden_size);
      c.mlp.learning_rate = m.value("learning_rate", c.mlp.learning_rate);
      c.mlp.epochs = m.value("epochs", c.mlp.epochs);
      c.mlp.batch_size = m.value("batch_size", c.mlp.batch_size);
      c.mlp.l2_penalty = m.value("l2_penalty", c.mlp.l2_penalty);
    }
    if (j.contains("forest")) {
      const auto& f = j["forest"];
      c.forest.n_trees = f.value("n_trees", c.forest.n_trees);
      if (f.contains("max_depth") && !f["max_depth"].is_null()) c.forest.max_depth = f["max_depth"].get<std::size_t>();
      c.forest.min_samples_leaf = f.value("min_samples_leaf", c.forest.min_samples_leaf);
      if (f.contains("features_per_split") && !f["features_per_split"].is_null())
        c.forest.features_per_split = f["features_per_split"].get<std::size_t>();
      c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
      c.forest.threads = f.value("threads", c.forest.threads);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("bad config: ") + e.what());
  }
  return c;
}

inline void validate(const RunConfig& c) {
  auto bad = [](const std::string& why) { throw Error(Errc::InvalidArgument, why); };
  if (c.dataset.empty()) bad("dataset path is required");
  if (c.output.empty()) bad("output directory is required");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) bad("train_fraction must lie in (0, 1)");
  if (c.model_kind == "tfidf-rf") {
    if (!c.embeddings.empty()) bad("tfidf-rf takes no embedding files");
  } else if (c.model_kind == "glove-lr") {
    if (!c.glove) bad("glove-lr needs a GloVe file");
  } else if (c.model_kind == "embed-mlp") {
    if (c.embeddings.size() != 1) bad("embed-mlp needs exactly one embedding file");
    if (c.embed_head != "mlp" && c.embed_head != "logreg") bad("head must be mlp or logreg");
  } else if (c.model_kind == "fused-mlp") {
    if (c.embeddings.size() != 2) bad("fused-mlp needs exactly two embedding files");
  } else {
    bad("unknown model kind '" + c.model_kind + "' (tfidf-rf, glove-lr, embed-mlp, fused-mlp)");
  }
  if (c.mlp.hidden_size == 0 || c.mlp.batch_size == 0) bad("mlp hidden_size and batch_size must be positive");
  if (c.forest.n_trees == 0) bad("forest n_trees must be positive");
}

namespace detail {

inline std::vector<std::string> misinfo_display_names() {
  return {kMisinfoDisplay.begin(), kMisinfoDisplay.end()};
}

inline constexpr std::array<std::string_view, kMisinfoClasses> kProbColumns = {
    "p_real_news", "p_refutes", "p_other", "p_possibly_severe", "p_highly_severe"};

inline std::vector<DenseVector> lookup(const EmbeddingSet& set, const Corpus& corpus) {
  std::vector<DenseVector> xs;
  xs.reserve(corpus.size());
  for (const auto& r : corpus) {
    const auto* v = set.find(r.id);
    if (!v) throw Error(Errc::MissingEmbedding, "no " + set.provider + " embedding for tweet " + r.id);
    xs.push_back(*v);
  }
  return xs;
}

/// Featurizer description stored beside the model, enough to re-encode text
/// when every channel can be recomputed (TFIDF, GloVe, hashing encoders).
inline nlohmann::json embedding_featurizer_json(const std::vector<EmbeddingSet>& sets) {
  HashFeaturizer h;
  for (const auto& s : sets) {
    auto settings = parse_hash_provider(s.provider);
    if (!settings || settings->dim != s.dim) {
      auto providers = nlohmann::json::array();
      for (const auto& t : sets) providers.push_back(t.provider);
      return {{"type", "embeddings"}, {"providers", providers}};
    }
    h.channels.push_back(*settings);
  }
  return featurizer_to_json(Featurizer{h});
}

struct Fitted {
  Model model;
  nlohmann::json featurizer;
  std::vector<std::vector<double>> test_proba;
};

template <FeatureRow X>
std::vector<std::vector<double>> proba_all(const Model& m, const std::vector<X>& xs) {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict_proba(m, x));
  return out;
}

}  // namespace detail

/// split -> featurize -> train -> predict -> evaluate. Writes model.json,
/// predictions.csv, metrics.json and report.md into the output directory,
/// all computed before any file is written.
inline int cmd_run(const RunConfig& config, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    validate(config);
    const auto corpus = load_corpus(config.dataset);
    for (const auto& r : corpus)
      if (!r.misinfo) throw Error(Errc::UnknownLabel, "tweet " + r.id + " has no misinfo label");
    const auto parts = split(corpus, {config.train_fraction, config.seed, config.stratified});
    if (parts.train.empty() || parts.test.empty()) throw Error(Errc::EmptyCorpus, "split left an empty partition");

    std::vector<std::size_t> ytrain, ytest;
    for (const auto& r : parts.train) ytrain.push_back(code(*r.misinfo));
    for (const auto& r : parts.test) ytest.push_back(code(*r.misinfo));
    auto texts = [](const Corpus& c) {
      std::vector<std::string> t;
      for (const auto& r : c) t.push_back(cleaned_text(r));
      return t;
    };

    LogRegHyper lr = config.logreg;
    lr.seed = config.seed;
    lr.class_weights = config.class_weights;
    MlpHyper mh = config.mlp;
    mh.seed = config.seed;
    mh.class_weights = config.class_weights;
    ForestParams fp = config.forest;
    fp.seed = config.seed;
    fp.class_weights = config.class_weights;

    detail::Fitted fit;
    if (config.model_kind == "tfidf-rf") {
      TfidfFeaturizer f{fit_tfidf(texts(parts.train))};
      std::vector<SparseVector> xtr, xte;
      for (const auto& t : texts(parts.train)) xtr.push_back(transform_tfidf(f.vocab, t));
      for (const auto& t : texts(parts.test)) xte.push_back(transform_tfidf(f.vocab, t));
      fit.model = train_forest(xtr, ytrain, kMisinfoClasses, fp);
      fit.test_proba = detail::proba_all(fit.model, xte);
      fit.featurizer = featurizer_to_json(Featurizer{std::move(f)});
    } else if (config.model_kind == "glove-lr") {
      auto table = std::make_shared<const EmbeddingTable>(load_glove(*config.glove));
      if (table->dim == 0) throw Error(Errc::EmptyInput, "GloVe file has no vectors");
      std::vector<DenseVector> xtr, xte;
      for (const auto& t : texts(parts.train)) xtr.push_back(average_embedding(*table, tokenize(t)));
      for (const auto& t : texts(parts.test)) xte.push_back(average_embedding(*table, tokenize(t)));
      fit.model = train_logreg(xtr, ytrain, kMisinfoClasses, lr);
      fit.test_proba = detail::proba_all(fit.model, xte);
      fit.featurizer = featurizer_to_json(Featurizer{GloveFeaturizer{table, config.glove->string()}});
    } else {
      std::vector<EmbeddingSet> sets;
      for (const auto& p : config.embeddings) sets.push_back(load_embeddings(p));
      auto xtr = detail::lookup(sets[0], parts.train);
      auto xte = detail::lookup(sets[0], parts.test);
      for (std::size_t s = 1; s < sets.size(); ++s) {
        const auto btr = detail::lookup(sets[s], parts.train);
        const auto bte = detail::lookup(sets[s], parts.test);
        for (std::size_t i = 0; i < xtr.size(); ++i) xtr[i] = fuse(xtr[i], btr[i]);
        for (std::size_t i = 0; i < xte.size(); ++i) xte[i] = fuse(xte[i], bte[i]);
      }
      if (config.model_kind == "embed-mlp" && config.embed_head == "logreg")
        fit.model = train_logreg(xtr, ytrain, kMisinfoClasses, lr);
      else
        fit.model = train_mlp(xtr, ytrain, kMisinfoClasses, mh);
      fit.test_proba = detail::proba_all(fit.model, xte);
      fit.featurizer = detail::embedding_featurizer_json(sets);
    }

    std::vector<std::size_t> preds;
    for (const auto& p : fit.test_proba) preds.push_back(argmax(p));
    const auto report = metrics(confusion(ytest, preds, kMisinfoClasses));
    const auto labels = detail::misinfo_display_names();

    std::string predictions;
    std::vector<std::string> header = {"id", "gold", "pred"};
    for (auto c : detail::kProbColumns) header.emplace_back(c);
    csv::append_row(predictions, header);
    for (std::size_t i = 0; i < parts.test.size(); ++i) {
      std::vector<std::string> row = {parts.test.records[i].id, std::string(kMisinfoCanonical[ytest[i]]),
                                      std::string(kMisinfoCanonical[preds[i]])};
      for (double p : fit.test_proba[i]) row.push_back(format_double(p));
      csv::append_row(predictions, row);
    }
    auto model_doc = model_to_json(fit.model);
    model_doc["featurizer"] = fit.featurizer;
    const std::string markdown = "# " + config.model_kind + " (train " + std::to_string(parts.train.size()) +
                                 ", test " + std::to_string(parts.test.size()) + ")\n\n" +
                                 render_report(report, labels, ReportFormat::Markdown);

    std::filesystem::create_directories(config.output);
    atomic_write(config.output / "model.json", model_doc.dump() + "\n");
    atomic_write(config.output / "predictions.csv", predictions);
    atomic_write(config.output / "metrics.json", render_report(report, labels, ReportFormat::Json));
    atomic_write(config.output / "report.md", markdown);
    log << markdown;
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// annotate / kappa

inline int cmd_annotate(const std::filesystem::path& corpus_path, std::size_t n, std::uint64_t seed,
                        const std::string& annotator, const std::filesystem::path& store, std::istream& in,
                        std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto sample = sample_for_annotation(load_corpus(corpus_path), n, seed);
    const auto added = run_session(sample, annotator, store, in, out);
    out << "\nrecorded " << added << " annotation(s) in " << store.string() << "\n";
    return kExitOk;
  });
}

inline std::string format_kappa(double k) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << k;
  return s.str();
}

inline int cmd_kappa(const std::filesystem::path& store, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto stats = agreement_report(store);
    out << "annotators: " << stats.annotators.size() << ", shared tweets: " << stats.items.size() << "\n";
    for (const auto& p : stats.pairwise) out << "cohen " << p.a << " vs " << p.b << ": " << format_kappa(p.kappa) << "\n";
    out << "mean pairwise cohen kappa: " << format_kappa(stats.mean_pairwise) << "\n";
    out << "fleiss kappa: " << format_kappa(stats.fleiss) << "\n\n| Emotion | #Tweets |\n|---|---|\n";
    std::size_t total = 0;
    for (std::size_t c = 0; c < kEmotionClasses; ++c) {
      std::string name(kEmotionCanonical[c]);
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      out << "| " << name << " | " << stats.majority_counts[c] << " |\n";
      total += stats.majority_counts[c];
    }
    out << "| Total | " << total << " |\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// attribute / project

struct AttributeOptions {
  std::filesystem::path model;
  std::string text;
  std::vector<std::size_t> classes;  // all classes when empty
  std::string method = "occlusion";  // occlusion | gradient
  bool ansi = false;
};

inline int cmd_attribute(const AttributeOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto doc = load_model_document(opt.model);
    Model model = model_from_json(doc);
    if (!doc.contains("featurizer")) throw Error(Errc::InvalidArgument, "model file carries no featurizer");
    if (doc["featurizer"].value("type", "") == "embeddings")
      throw Error(Errc::InvalidArgument, "model was trained on external embeddings that cannot be re-encoded here");
    TextPipeline pipeline(featurizer_from_json(doc["featurizer"]), std::move(model));
    std::vector<std::size_t> classes = opt.classes;
    if (classes.empty())
      for (std::size_t c = 0; c < model_classes(pipeline.model()); ++c) classes.push_back(c);
    const auto names = detail::misinfo_display_names();

    if (opt.method == "gradient") {
      const auto* mlp = std::get_if<Mlp>(&pipeline.model());
      if (!mlp) throw Error(Errc::InvalidArgument, "gradient attribution needs an mlp model");
      const auto features = featurize(pipeline.featurizer(), clean_tweet(opt.text));
      const auto* x = std::get_if<DenseVector>(&features);
      if (!x) throw Error(Errc::InvalidArgument, "gradient attribution needs dense features");
      auto arr = nlohmann::json::array();
      for (auto c : classes) {
        const auto scores = gradient_input_attribution(*mlp, *x, c);
        arr.push_back({{"class", c}, {"label", c < names.size() ? names[c] : std::to_string(c)}, {"scores", scores}});
      }
      out << arr.dump(2) << "\n";
      return kExitOk;
    }
    if (opt.method != "occlusion") throw Error(Errc::InvalidArgument, "method must be occlusion or gradient");
    const auto records = occlusion_attribution(pipeline, opt.text, classes);
    if (opt.ansi)
      out << render_attribution_ansi(records, names);
    else
      out << attribution_to_json(records, names).dump(2) << "\n";
    return kExitOk;
  });
}

inline int cmd_project(const std::filesystem::path& embeddings, const std::optional<std::filesystem::path>& corpus_path,
                       const std::filesystem::path& out_csv, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto set = load_embeddings(embeddings);
    std::unordered_map<std::string, std::optional<MisinfoLabel>> label_of;
    if (corpus_path)
      for (const auto& r : load_corpus(*corpus_path)) label_of[r.id] = r.misinfo;
    std::vector<DenseVector> vectors;
    std::vector<std::optional<MisinfoLabel>> labels;
    for (const auto& id : set.ids) {
      vectors.push_back(*set.find(id));
      auto it = label_of.find(id);
      labels.push_back(it == label_of.end() ? std::nullopt : it->second);
    }
    const auto projection = pca_project(vectors, set.ids, labels);
    emit_plot_csv(projection, out_csv);
    log << "projected " << projection.points.size() << " points -> " << out_csv.string() << "\n";
    return kExitOk;
  });
}

}  // namespace emomis
