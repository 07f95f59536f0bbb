#include <gtest/gtest.h>

#include "emomis/models/model.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace emomis;
using namespace emomis::testing;

namespace {
Errc load_error(const std::filesystem::path& p) {
  try {
    load_model(p);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "loaded a bad model";
  return Errc::InvalidArgument;
}

std::vector<Model> trained_models() {
  Rng rng(9);
  const auto xs = random_rows(rng, 60, 5);
  const auto ys = random_labels(rng, 60, 3);
  LogRegHyper lh;
  lh.epochs = 50;
  MlpHyper mh;
  mh.hidden_size = 7;
  mh.epochs = 10;
  ForestParams fp;
  fp.n_trees = 6;
  return {Model(train_logreg(xs, ys, 3, lh)), Model(train_mlp(xs, ys, 3, mh)), Model(train_forest(xs, ys, 3, fp))};
}
}  // namespace

TEST(ModelIo, RoundTripPreservesPredictions) {
  TempDir dir;
  Rng rng(10);
  for (const auto& m : trained_models()) {
    const auto path = dir / (std::string(model_kind(m)) + ".json");
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(model_kind(back), model_kind(m));
    EXPECT_EQ(model_dim(back), 5u);
    EXPECT_EQ(model_classes(back), 3u);
    for (const auto& x : random_rows(rng, 100, 5)) {
      const auto a = predict_proba(m, x);
      const auto b = predict_proba(back, x);
      for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
    }
    EXPECT_EQ(model_to_json(back), model_to_json(m));
  }
}

TEST(ModelIo, ProbabilitiesAreDistributions) {
  Rng rng(11);
  for (const auto& m : trained_models())
    for (const auto& x : random_rows(rng, 50, 5)) {
      double s = 0;
      for (double p : predict_proba(m, x)) {
        EXPECT_GE(p, 0.0);
        s += p;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST(ModelIo, DocumentLayout) {
  const auto j = model_to_json(trained_models()[0]);
  EXPECT_EQ(j["kind"], "logreg");
  EXPECT_EQ(j["version"], 1);
  EXPECT_EQ(j["n_classes"], 3);
  EXPECT_EQ(j["dim"], 5);
  EXPECT_TRUE(j["params"].contains("weights"));
  EXPECT_TRUE(j["params"].contains("bias"));
}

TEST(ModelIo, ExtraKeysAreKept) {
  TempDir dir;
  save_model(trained_models()[0], dir / "m.json", {{"note", "x"}});
  EXPECT_EQ(load_model_document(dir / "m.json")["note"], "x");
  EXPECT_EQ(model_kind(load_model(dir / "m.json")), "logreg");
}

TEST(ModelIo, RejectsBadDocuments) {
  TempDir dir;
  const auto good = model_to_json(trained_models()[2]).dump();

  auto unknown = nlohmann::json::parse(good);
  unknown["kind"] = "svm";
  write_text(dir / "kind.json", unknown.dump());
  EXPECT_EQ(load_error(dir / "kind.json"), Errc::SchemaError);

  auto version = nlohmann::json::parse(good);
  version["version"] = 2;
  write_text(dir / "version.json", version.dump());
  EXPECT_EQ(load_error(dir / "version.json"), Errc::SchemaError);

  for (std::size_t cut : {std::size_t{1}, good.size() / 3, good.size() / 2, good.size() - 2}) {
    write_text(dir / "cut.json", good.substr(0, cut));
    EXPECT_EQ(load_error(dir / "cut.json"), Errc::SchemaError) << "cut at " << cut;
  }

  auto shape = nlohmann::json::parse(model_to_json(trained_models()[0]).dump());
  shape["params"]["bias"].erase(0);
  write_text(dir / "shape.json", shape.dump());
  EXPECT_EQ(load_error(dir / "shape.json"), Errc::SchemaError);

  EXPECT_EQ(load_error(dir / "missing.json"), Errc::IoError);
}

TEST(ModelIo, DimensionChecked) {
  for (const auto& m : trained_models()) EXPECT_THROW(predict_proba(m, DenseVector{1, 2}), Error);
  const auto mlp = trained_models()[1];
  SparseVector s;
  s.dim = 5;
  try {
    predict_proba(mlp, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}
