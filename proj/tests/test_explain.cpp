#include <gtest/gtest.h>

#include <algorithm>

#include "emomis/explain.hpp"
#include "emomis/pipeline.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace emomis;
using namespace emomis::testing;

namespace {
/// P(class 0) = 0.9 when "quack" is present, else 0.1.
struct QuackStub {
  std::vector<double> predict_proba(std::string_view text) const {
    const auto toks = tokenize(text);
    const bool hit = std::find(toks.begin(), toks.end(), "quack") != toks.end();
    return hit ? std::vector<double>{0.9, 0.1} : std::vector<double>{0.1, 0.9};
  }
};

TextPipeline keyword_glove_pipeline() {
  const auto corpus = keyword_corpus(200);
  auto table = std::make_shared<const EmbeddingTable>(parse_glove(keyword_glove(8)));
  std::vector<DenseVector> xs;
  std::vector<std::size_t> ys;
  for (const auto& r : corpus) {
    xs.push_back(average_embedding(*table, tokenize(cleaned_text(r))));
    ys.push_back(code(*r.misinfo));
  }
  LogRegHyper hp;
  hp.epochs = 300;
  hp.learning_rate = 0.5;
  return TextPipeline(GloveFeaturizer{table, "inline"}, Model(train_logreg(xs, ys, kMisinfoClasses, hp)));
}

std::vector<std::size_t> all_classes(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t c = 0; c < n; ++c) v[c] = c;
  return v;
}
}  // namespace

TEST(Occlusion, PlantedStubScores) {
  const auto recs = occlusion_attribution(QuackStub{}, "the duck says quack loudly", 0);
  ASSERT_EQ(recs.size(), 5u);
  for (const auto& r : recs) {
    if (r.token == "quack") {
      EXPECT_NEAR(r.score, 0.8, 1e-12);
      EXPECT_EQ(r.token_index, 3u);
    } else {
      EXPECT_EQ(r.score, 0.0);
    }
  }
}

TEST(Occlusion, CleansBeforeTokenizing) {
  const auto recs = occlusion_attribution(QuackStub{}, "@someone #Quack https://t.co/x", 0);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].token, "quack");
  EXPECT_THROW(occlusion_attribution(QuackStub{}, "@only https://t.co/x", 0), Error);
  EXPECT_THROW(occlusion_attribution(QuackStub{}, "quack", 2), Error);
}

TEST(Occlusion, KeywordDominatesAndOovIsZero) {
  const auto p = keyword_glove_pipeline();
  const std::string text = "today people cure zzyzx news";
  const auto recs = occlusion_attribution(p, text, 3);  // class 3 keyword is "cure"
  double best = -1;
  std::string best_token;
  for (const auto& r : recs) {
    if (r.token == "zzyzx") {
      EXPECT_EQ(r.score, 0.0);
    }
    if (r.score > best) {
      best = r.score;
      best_token = r.token;
    }
  }
  EXPECT_EQ(best_token, "cure");
  EXPECT_GT(best, 0.0);
  for (const auto& r : recs)
    if (r.token != "cure") {
      EXPECT_LT(r.score, best);
    }
}

TEST(Occlusion, MatchesDirectReevaluation) {
  const auto p = keyword_glove_pipeline();
  const std::string text = "@x covid debunked rumor week http://t.co/1";
  const auto classes = all_classes(kMisinfoClasses);
  const auto recs = occlusion_attribution(p, text, classes);
  const std::vector<std::string> toks = {"covid", "debunked", "rumor", "week"};
  ASSERT_EQ(recs.size(), toks.size() * classes.size());
  const auto full = p.predict_proba("covid debunked rumor week");
  for (const auto& r : recs) {
    std::string reduced;
    for (std::size_t i = 0; i < toks.size(); ++i)
      if (i != r.token_index) reduced += (reduced.empty() ? "" : " ") + toks[i];
    EXPECT_NEAR(r.score, full[r.cls] - p.predict_proba(reduced)[r.cls], 1e-12);
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    double sum = 0;
    for (const auto& r : recs)
      if (r.token_index == i) sum += r.score;
    EXPECT_NEAR(sum, 0.0, 1e-9);
  }
}

TEST(Occlusion, JsonAndAnsiRendering) {
  const auto recs = occlusion_attribution(QuackStub{}, "quack quack moo", std::vector<std::size_t>{0, 1});
  const std::vector<std::string> names = {"duck", "cow"};
  const auto j = attribution_to_json(recs, names);
  ASSERT_EQ(j.size(), 6u);
  EXPECT_EQ(j[0]["token"], "quack");
  EXPECT_EQ(j[0]["class"], 0);
  EXPECT_EQ(j[0]["label"], "duck");
  EXPECT_EQ(j[1]["label"], "cow");
  // Removing one "quack" leaves the other, so only "moo" could move P; it does not.
  for (const auto& r : j) EXPECT_EQ(r["score"], 0.0);

  const auto solo = occlusion_attribution(QuackStub{}, "quack moo", std::vector<std::size_t>{0, 1});
  const auto ansi = render_attribution_ansi(solo, names);
  EXPECT_EQ(ansi, "duck: \x1b[48;5;40mquack\x1b[0m moo\ncow: \x1b[48;5;160mquack\x1b[0m moo\n");
}

TEST(GradientInput, ZeroInputGivesZero) {
  const auto m = Mlp::initialized(5, 4, 3, 2);
  for (double s : gradient_input_attribution(m, DenseVector(5, 0.0), 1)) EXPECT_EQ(s, 0.0);
  EXPECT_THROW(gradient_input_attribution(m, DenseVector(4, 0.0), 1), Error);
}

TEST(GradientInput, MatchesFiniteDifferences) {
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_LT(mlp_input_gradcheck(s), 1e-4) << "seed " << s;
}

TEST(GradientInput, AllUnitsActiveIsLinear) {
  auto m = Mlp::initialized(4, 3, 2, 8);
  for (auto& b : m.b1()) b = 10.0;  // every hidden unit stays active on small inputs
  const DenseVector x = {0.3, -0.2, 0.5, 0.1};
  for (double p : m.forward(x).pre) ASSERT_GT(p, 0.0);
  const auto s = gradient_input_attribution(m, x, 1);
  for (std::size_t d = 0; d < 4; ++d) {
    double w = 0;
    for (std::size_t h = 0; h < 3; ++h) w += m.w2()[1 * 3 + h] * m.w1()[h * 4 + d];
    EXPECT_NEAR(s[d], w * x[d], 1e-15);
  }
}

namespace {
std::vector<DenseVector> planted_plane(std::size_t n, std::uint64_t seed, double noise) {
  Rng rng(seed);
  const DenseVector u = {0.6, 0.8, 0.0}, v = {0.0, 0.0, 1.0};
  const DenseVector u2 = {0.8 / std::sqrt(1.28), -0.6 / std::sqrt(1.28), 0.8 / std::sqrt(1.28)};
  std::vector<DenseVector> xs;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 3.0 * rng.normal(), b = rng.normal();
    DenseVector x(3);
    for (std::size_t j = 0; j < 3; ++j) x[j] = a * u[j] + b * (u2[j] + v[j]) / std::sqrt(2.0) + noise * rng.normal();
    xs.push_back(x);
  }
  return xs;
}
}  // namespace

TEST(Pca, AxisAlignedRecoversCoordinates) {
  // Variance 4 on axis 0, 1 on axis 1, nothing elsewhere.
  std::vector<DenseVector> xs;
  const double a[] = {2, -2, 2, -2}, b[] = {1, 1, -1, -1};
  for (int i = 0; i < 4; ++i) xs.push_back({a[i], b[i], 0.0, 0.0});
  const auto r = pca_fit(xs);
  EXPECT_NEAR(r.variances[0], 16.0 / 3.0, 1e-9);
  EXPECT_NEAR(r.variances[1], 4.0 / 3.0, 1e-9);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(r.projection.points[i].x, a[i], 1e-9);
    EXPECT_NEAR(r.projection.points[i].y, b[i], 1e-9);
  }
}

TEST(Pca, PlantedPlaneCapturesVariance) {
  const auto xs = planted_plane(300, 1, 1e-6);
  const auto r = pca_fit(xs);
  const auto eig = jacobi_eigenvalues(covariance(xs));
  const double total = eig[0] + eig[1] + eig[2];
  EXPECT_GE((r.variances[0] + r.variances[1]) / total, 0.99);
  EXPECT_NEAR(r.variances[0], eig[0], 1e-8 * eig[0]);
  EXPECT_NEAR(r.variances[1], eig[1], 1e-6 * eig[0]);
  EXPECT_NEAR(r.total_variance, total, 1e-9 * total);
  EXPECT_GE(r.variances[0], r.variances[1]);
  EXPECT_GE(r.variances[1], 0.0);
}

TEST(Pca, ComponentsOrthonormal) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 2 + rng.below(30);
    std::vector<DenseVector> xs(5 + rng.below(40), DenseVector(dim));
    for (auto& x : xs)
      for (std::size_t j = 0; j < dim; ++j) x[j] = rng.normal() * static_cast<double>(j + 1);
    const auto r = pca_fit(xs);
    EXPECT_NEAR(l2_norm(r.components[0]), 1.0, 1e-8);
    EXPECT_NEAR(l2_norm(r.components[1]), 1.0, 1e-8);
    double d = 0;
    for (std::size_t j = 0; j < dim; ++j) d += r.components[0][j] * r.components[1][j];
    EXPECT_LT(std::abs(d), 1e-8);
  }
}

TEST(Pca, TranslationInvariant) {
  const auto xs = planted_plane(100, 3, 0.1);
  auto shifted = xs;
  for (auto& x : shifted) {
    x[0] += 100.0;
    x[1] -= 7.5;
    x[2] += 0.25;
  }
  const auto a = pca_fit(xs), b = pca_fit(shifted);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_NEAR(a.projection.points[i].x, b.projection.points[i].x, 1e-8);
    EXPECT_NEAR(a.projection.points[i].y, b.projection.points[i].y, 1e-8);
  }
}

TEST(Pca, Errors) {
  auto code_of = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  EXPECT_EQ(code_of([] { pca_fit({{1, 2}, {3, 4}}); }), Errc::TooFewPoints);
  EXPECT_EQ(code_of([] { pca_fit({{1, 2}, {1, 2}, {1, 2}}); }), Errc::DegenerateData);
  EXPECT_EQ(code_of([] { pca_fit({{1}, {2}, {3}}); }), Errc::ShapeMismatch);
  EXPECT_EQ(code_of([] { pca_project({{1, 2}, {3, 4}, {5, 7}}, {"a", "a", "b"}, {{}, {}, {}}); }), Errc::DuplicateId);
  EXPECT_EQ(code_of([] { pca_project({{1, 2}, {3, 4}, {5, 7}}, {"a", "b"}, {{}, {}, {}}); }), Errc::LengthMismatch);
}

TEST(PlotCsv, LayoutAndRoundTrip) {
  Projection2D two;
  two.points = {{"a", 0.1, -1.0 / 3.0, MisinfoLabel::HighlySevere}, {"b,c", 1e-300, 2.5, std::nullopt}};
  const auto text = format_plot_csv(two);
  EXPECT_EQ(split_lines(text).size(), 3u);
  EXPECT_TRUE(text.starts_with("id,x,y,label\n"));
  EXPECT_NE(text.find(",highly severe\n"), std::string::npos);
  TempDir dir;
  emit_plot_csv(two, dir / "p.csv");
  const auto back = parse_plot_csv(read_text(dir / "p.csv"));
  EXPECT_EQ(back.points, two.points);
}

TEST(PlotCsv, ProjectWritesLabels) {
  const auto xs = planted_plane(10, 4, 0.1);
  std::vector<std::string> ids;
  std::vector<std::optional<MisinfoLabel>> labels;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ids.push_back("p" + std::to_string(i));
    labels.push_back(static_cast<MisinfoLabel>(i % kMisinfoClasses));
  }
  const auto proj = pca_project(xs, ids, labels);
  const auto back = parse_plot_csv(format_plot_csv(proj));
  ASSERT_EQ(back.points.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(back.points[i].id, ids[i]);
    EXPECT_EQ(back.points[i].label, labels[i]);
    EXPECT_NEAR(back.points[i].x, proj.points[i].x, 1e-9);
  }
}
