#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "emomis/commands.hpp"

namespace {

std::optional<emomis::SplitSpec> split_spec(double fraction, std::uint64_t seed, bool stratified, bool requested) {
  if (!requested) return std::nullopt;
  return emomis::SplitSpec{fraction, seed, stratified};
}

}  // namespace

int main(int argc, char** argv) {
  using namespace emomis;
  CLI::App app{"Misinformation-severity classification toolkit"};
  app.require_subcommand(1);
  const std::uint64_t env_seed = default_seed();
  int rc = kExitOk;

  // clean
  std::string clean_in, clean_out;
  auto* clean = app.add_subcommand("clean", "Populate the clean_text column (mentions, links and '#' removed)");
  clean->add_option("input", clean_in, "Corpus CSV")->required();
  clean->add_option("output", clean_out, "Output CSV")->required();
  clean->callback([&] { rc = cmd_clean(clean_in, clean_out, std::cout, std::cerr); });

  // split
  std::string split_in, split_out;
  double split_fraction = 0.8;
  std::uint64_t split_seed = env_seed;
  bool split_strat = false;
  auto* splitc = app.add_subcommand("split", "Write train.csv and test.csv partitions");
  splitc->add_option("input", split_in, "Corpus CSV")->required();
  splitc->add_option("output_dir", split_out, "Directory for train.csv and test.csv")->required();
  splitc->add_option("--train-fraction", split_fraction, "Fraction of rows for training")->capture_default_str();
  splitc->add_option("--seed", split_seed, "Shuffle seed (default $EMOMIS_SEED or 0)");
  splitc->add_flag("--stratified", split_strat, "Split each misinfo class separately");
  splitc->callback([&] {
    rc = cmd_split(split_in, split_out, {split_fraction, split_seed, split_strat}, std::cout, std::cerr);
  });

  // stats
  std::string stats_in;
  double stats_fraction = 0.8;
  std::uint64_t stats_seed = env_seed;
  bool stats_strat = false;
  auto* stats = app.add_subcommand("stats", "Print per-label counts (optionally with a train/test split)");
  stats->add_option("input", stats_in, "Corpus CSV")->required();
  auto* stats_fraction_opt =
      stats->add_option("--train-fraction", stats_fraction, "Also show the split produced by this fraction");
  stats->add_option("--seed", stats_seed, "Shuffle seed for the split columns");
  stats->add_flag("--stratified", stats_strat, "Stratify the split columns");
  stats->callback([&] {
    rc = cmd_stats(stats_in, split_spec(stats_fraction, stats_seed, stats_strat, stats_fraction_opt->count() > 0),
                   std::cout, std::cerr);
  });

  // embed-hash
  std::string eh_in, eh_out;
  std::size_t eh_dim = 256;
  std::uint64_t eh_seed = env_seed;
  auto* eh = app.add_subcommand("embed-hash", "Encode a corpus with the hashing encoder into embedding JSONL");
  eh->add_option("input", eh_in, "Corpus CSV")->required();
  eh->add_option("output", eh_out, "Embedding JSONL")->required();
  eh->add_option("--dim", eh_dim, "Vector dimension")->capture_default_str();
  eh->add_option("--seed", eh_seed, "Hash seed (default $EMOMIS_SEED or 0)");
  eh->callback([&] { rc = cmd_embed_hash(eh_in, eh_out, eh_dim, eh_seed, std::cout, std::cerr); });

  // run
  std::string run_config_path, run_dataset, run_model, run_glove, run_output, run_head;
  std::vector<std::string> run_embeddings;
  std::uint64_t run_seed = env_seed;
  double run_fraction = 0.8;
  bool run_strat = false, run_weights = false;
  std::size_t run_threads = 1, run_trees = 0, run_epochs = 0, run_hidden = 0;
  double run_lr = 0.0;
  auto* run = app.add_subcommand("run", "Split, featurize, train, predict and evaluate one model");
  run->add_option("--config", run_config_path, "JSON config; flags below override it");
  auto* o_dataset = run->add_option("--dataset", run_dataset, "Corpus CSV");
  auto* o_model = run->add_option("--model", run_model, "tfidf-rf | glove-lr | embed-mlp | fused-mlp");
  auto* o_emb = run->add_option("--embeddings", run_embeddings, "Embedding JSONL (one for embed-mlp, two for fused-mlp)");
  auto* o_glove = run->add_option("--glove", run_glove, "GloVe text file for glove-lr");
  auto* o_out = run->add_option("--output", run_output, "Output directory");
  auto* o_seed = run->add_option("--seed", run_seed, "Seed for split and model (default $EMOMIS_SEED or 0)");
  auto* o_frac = run->add_option("--train-fraction", run_fraction, "Training fraction (default 0.8)");
  auto* o_strat = run->add_flag("--stratified", run_strat, "Stratified split");
  auto* o_weights = run->add_flag("--class-weights", run_weights, "Inverse-frequency class weights");
  auto* o_head = run->add_option("--head", run_head, "Classifier for embed-mlp: mlp | logreg");
  auto* o_threads = run->add_option("--threads", run_threads, "Forest training threads");
  auto* o_trees = run->add_option("--trees", run_trees, "Forest size");
  auto* o_epochs = run->add_option("--epochs", run_epochs, "Epochs for logreg/mlp");
  auto* o_hidden = run->add_option("--hidden", run_hidden, "MLP hidden units");
  auto* o_lr = run->add_option("--learning-rate", run_lr, "Learning rate for logreg/mlp");
  run->callback([&] {
    rc = guarded(std::cerr, [&] {
      RunConfig cfg;
      cfg.seed = env_seed;
      if (!run_config_path.empty()) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(read_file(run_config_path));
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::InvalidArgument, std::string("config is not valid JSON: ") + e.what());
        }
        cfg = run_config_from_json(j, cfg);
      }
      if (o_dataset->count()) cfg.dataset = run_dataset;
      if (o_model->count()) cfg.model_kind = run_model;
      if (o_emb->count()) cfg.embeddings.assign(run_embeddings.begin(), run_embeddings.end());
      if (o_glove->count()) cfg.glove = run_glove;
      if (o_out->count()) cfg.output = run_output;
      if (o_seed->count()) cfg.seed = run_seed;
      if (o_frac->count()) cfg.train_fraction = run_fraction;
      if (o_strat->count()) cfg.stratified = run_strat;
      if (o_weights->count()) cfg.class_weights = run_weights;
      if (o_head->count()) cfg.embed_head = run_head;
      if (o_threads->count()) cfg.forest.threads = run_threads;
      if (o_trees->count()) cfg.forest.n_trees = run_trees;
      if (o_epochs->count()) cfg.logreg.epochs = cfg.mlp.epochs = run_epochs;
      if (o_hidden->count()) cfg.mlp.hidden_size = run_hidden;
      if (o_lr->count()) cfg.logreg.learning_rate = cfg.mlp.learning_rate = run_lr;
      return cmd_run(cfg, std::cout, std::cerr);
    });
  });

  // annotate
  std::string an_corpus, an_store, an_annotator;
  std::size_t an_n = 100;
  std::uint64_t an_seed = env_seed;
  auto* an = app.add_subcommand("annotate", "Interactive emotion labeling session (resumable)");
  an->add_option("corpus", an_corpus, "Corpus CSV to sample from")->required();
  an->add_option("--store", an_store, "Annotation store CSV")->required();
  an->add_option("--annotator", an_annotator, "Annotator id")->required();
  an->add_option("-n,--count", an_n, "Sample size")->capture_default_str();
  an->add_option("--seed", an_seed, "Sampling seed; keep it fixed across annotators");
  an->callback([&] { rc = cmd_annotate(an_corpus, an_n, an_seed, an_annotator, an_store, std::cin, std::cout, std::cerr); });

  // kappa
  std::string kappa_store;
  auto* kappa = app.add_subcommand("kappa", "Inter-annotator agreement for an annotation store");
  kappa->add_option("store", kappa_store, "Annotation store CSV")->required();
  kappa->callback([&] { rc = cmd_kappa(kappa_store, std::cout, std::cerr); });

  // attribute
  AttributeOptions at;
  auto* attr = app.add_subcommand("attribute", "Per-token class attribution for one text");
  attr->add_option("model", at.model, "model.json written by run")->required();
  attr->add_option("text", at.text, "Tweet text")->required();
  attr->add_option("--class", at.classes, "Class code(s) 0-4 (default all)");
  attr->add_option("--method", at.method, "occlusion | gradient")->capture_default_str();
  attr->add_flag("--ansi", at.ansi, "Colored terminal rendering instead of JSON");
  attr->callback([&] { rc = cmd_attribute(at, std::cout, std::cerr); });

  // project
  std::string pr_emb, pr_corpus, pr_out;
  auto* proj = app.add_subcommand("project", "PCA projection of an embedding set to plot CSV");
  proj->add_option("embeddings", pr_emb, "Embedding JSONL")->required();
  proj->add_option("output", pr_out, "Plot CSV (id,x,y,label)")->required();
  auto* pr_corpus_opt = proj->add_option("--corpus", pr_corpus, "Corpus CSV supplying labels");
  proj->callback([&] {
    rc = cmd_project(pr_emb, pr_corpus_opt->count() ? std::optional<std::filesystem::path>(pr_corpus) : std::nullopt,
                     pr_out, std::cout, std::cerr);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  return rc;
}
