#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "emomis/annotate.hpp"
#include "support/fixtures.hpp"

using namespace emomis;
using namespace emomis::testing;

namespace {
std::size_t prompts_in(const std::string& transcript) {
  std::size_t n = 0;
  for (auto pos = transcript.find("choice (1-7"); pos != std::string::npos; pos = transcript.find("choice (1-7", pos + 1))
    ++n;
  return n;
}

std::vector<std::size_t> codes(std::initializer_list<char> letters) {
  std::vector<std::size_t> v;
  for (char c : letters) v.push_back(static_cast<std::size_t>(c - 'A'));
  return v;
}

const Clock fixed_clock = [] { return std::int64_t{1700000000}; };
}  // namespace

TEST(Sample, DeterministicUniqueAndBounded) {
  const auto corpus = make_corpus(4337);
  const auto a = sample_for_annotation(corpus, 100, 5);
  const auto b = sample_for_annotation(corpus, 100, 5);
  EXPECT_EQ(a, b);
  std::set<std::string> ids;
  for (const auto& r : a) ids.insert(r.id);
  EXPECT_EQ(ids.size(), 100u);
  EXPECT_NE(sample_for_annotation(corpus, 100, 6), a);

  const auto small = make_corpus(12);
  const auto all = sample_for_annotation(small, 12, 1);
  std::set<std::string> every;
  for (const auto& r : all) every.insert(r.id);
  EXPECT_EQ(every.size(), 12u);
  try {
    sample_for_annotation(small, 13, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SampleTooLarge);
  }
}

TEST(Session, FullSessionWritesEveryRow) {
  TempDir dir;
  const auto sample = make_corpus(100);
  std::string answers;
  for (int i = 0; i < 100; ++i) answers += std::to_string(1 + i % 7) + "\n";
  std::istringstream in(answers);
  std::ostringstream out;
  EXPECT_EQ(run_session(sample, "alice", dir / "s.csv", in, out, fixed_clock), 100u);
  const auto store = AnnotationStore::load(dir / "s.csv");
  EXPECT_EQ(store.size(), 100u);
  EXPECT_EQ(store.annotations()[7].label, EmotionLabel::Anger);
  EXPECT_EQ(store.annotations()[0].timestamp, 1700000000);
  EXPECT_TRUE(read_text(dir / "s.csv").starts_with(kStoreHeader));
}

TEST(Session, ResumesWhereItStopped) {
  TempDir dir;
  const auto sample = make_corpus(100);
  std::string first;
  for (int i = 0; i < 40; ++i) first += "4\n";
  first += "q\n";
  std::istringstream in1(first);
  std::ostringstream out1;
  EXPECT_EQ(run_session(sample, "bob", dir / "s.csv", in1, out1, fixed_clock), 40u);

  std::string rest;
  for (int i = 0; i < 60; ++i) rest += "5\n";
  std::istringstream in2(rest);
  std::ostringstream out2;
  EXPECT_EQ(run_session(sample, "bob", dir / "s.csv", in2, out2, fixed_clock), 60u);
  EXPECT_EQ(prompts_in(out2.str()), 60u);
  EXPECT_EQ(AnnotationStore::load(dir / "s.csv").size(), 100u);

  // Another annotator starts from scratch on the same store.
  std::istringstream in3("1\n");
  std::ostringstream out3;
  EXPECT_EQ(run_session(sample, "carol", dir / "s.csv", in3, out3, fixed_clock), 1u);
  EXPECT_EQ(AnnotationStore::load(dir / "s.csv").size(), 101u);
}

TEST(Session, InvalidChoiceReprompts) {
  TempDir dir;
  const auto sample = make_corpus(2);
  std::istringstream in("8\n\nfoo\n0\n3\n");
  std::ostringstream out;
  EXPECT_EQ(run_session(sample, "dana", dir / "s.csv", in, out, fixed_clock), 1u);
  EXPECT_EQ(prompts_in(out.str()), 6u);  // four rejected, one accepted, one cut by end of input
  const auto store = AnnotationStore::load(dir / "s.csv");
  ASSERT_EQ(store.size(), 1u);
  EXPECT_EQ(store.annotations()[0].label, EmotionLabel::Fear);
  EXPECT_NE(out.str().find("invalid choice '8'"), std::string::npos);
}

TEST(Session, RejectsEmptyAnnotator) {
  TempDir dir;
  std::istringstream in;
  std::ostringstream out;
  EXPECT_THROW(run_session(make_corpus(1), "", dir / "s.csv", in, out), Error);
}

TEST(Store, TornTailIsDroppedAndRepaired) {
  TempDir dir;
  const auto p = dir / "s.csv";
  write_text(p, std::string(kStoreHeader) + "t1,a,joy,1700000000\nt2,a,fear,17000");
  EXPECT_EQ(AnnotationStore::load(p).size(), 1u);
  write_text(p, std::string(kStoreHeader) + "t1,a,joy,1\n\"t,2\",a,fe");
  EXPECT_EQ(AnnotationStore::load(p).size(), 1u);
  AnnotationStore::repair(p);
  AnnotationStore::append(p, {"t3", "a", EmotionLabel::Sadness, 5});
  const auto s = AnnotationStore::load(p);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.annotations()[1], (Annotation{"t3", "a", EmotionLabel::Sadness, 5}));
}

TEST(Store, RejectsDuplicatesAndBadRows) {
  TempDir dir;
  const auto p = dir / "s.csv";
  write_text(p, std::string(kStoreHeader) + "t1,a,joy,1\nt1,a,fear,2\n");
  try {
    AnnotationStore::load(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
    EXPECT_EQ(e.where(), 2u);
  }
  write_text(p, std::string(kStoreHeader) + "t1,a,bored,1\n");
  EXPECT_THROW(AnnotationStore::load(p), Error);
  EXPECT_EQ(AnnotationStore::load(dir / "absent.csv").size(), 0u);
}

TEST(Store, QuotedFieldsRoundTrip) {
  TempDir dir;
  const Annotation a{"id,with \"quotes\"", "ann one", EmotionLabel::Disgust, -3};
  AnnotationStore::append(dir / "s.csv", a);
  EXPECT_EQ(AnnotationStore::load(dir / "s.csv").annotations().at(0), a);
}

TEST(Cohen, HandDerivedExamples) {
  const auto a1 = codes({'A', 'A', 'B', 'B'}), b1 = codes({'A', 'B', 'A', 'B'});
  EXPECT_NEAR(cohen_kappa(a1, b1), 0.0, 1e-12);
  const auto a2 = codes({'A', 'A', 'A', 'B'}), b2 = codes({'A', 'A', 'B', 'B'});
  EXPECT_NEAR(cohen_kappa(a2, b2), 0.5, 1e-12);
  EXPECT_EQ(cohen_kappa(a1, a1), 1.0);
  const auto same = codes({'C', 'C', 'C'});
  EXPECT_EQ(cohen_kappa(same, same), 1.0);
}

TEST(Cohen, Errors) {
  const auto a = codes({'A', 'B'}), b = codes({'A'});
  const std::vector<std::size_t> none;
  EXPECT_THROW(cohen_kappa(a, b), Error);
  try {
    cohen_kappa(none, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(Cohen, SymmetricAndRelabelInvariantOnFuzz) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(60), k = 2 + rng.below(6);
    std::vector<std::size_t> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.below(k);
      b[i] = rng.below(2) ? a[i] : rng.below(k);
    }
    std::vector<std::size_t> perm(k);
    for (std::size_t c = 0; c < k; ++c) perm[c] = c;
    shuffle(std::span(perm), rng);
    std::vector<std::size_t> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = perm[a[i]];
      pb[i] = perm[b[i]];
    }
    const double k0 = cohen_kappa(a, b);
    EXPECT_NEAR(k0, cohen_kappa(b, a), 1e-12);
    EXPECT_NEAR(k0, cohen_kappa(pa, pb), 1e-12);
    EXPECT_GE(k0, -1.0);
    EXPECT_LE(k0, 1.0);
  }
}

TEST(Fleiss, Examples) {
  EXPECT_EQ(fleiss_kappa({{3, 0}, {0, 3}}), 1.0);
  EXPECT_NEAR(fleiss_kappa({{2, 1}, {1, 2}}), -1.0 / 3.0, 1e-12);
  EXPECT_EQ(fleiss_kappa({{0, 4, 0}, {0, 4, 0}}), 1.0);  // unanimous on one label
  EXPECT_EQ(fleiss_kappa({{5, 0, 0}, {0, 0, 5}, {0, 5, 0}, {5, 0, 0}}), 1.0);
}

TEST(Fleiss, Errors) {
  auto code_of = [](const std::vector<std::vector<std::size_t>>& t) {
    try {
      fleiss_kappa(t);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  EXPECT_EQ(code_of({{2, 1}, {1, 1}}), Errc::RaggedTable);
  EXPECT_EQ(code_of({{2, 1}, {1, 1, 1}}), Errc::RaggedTable);
  EXPECT_EQ(code_of({{1, 0}, {0, 1}}), Errc::TooFewRaters);
  EXPECT_EQ(code_of({}), Errc::EmptyInput);
}

TEST(Agreement, IdenticalAnnotatorsAgreeFully) {
  TempDir dir;
  const auto p = dir / "s.csv";
  Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    const auto label = static_cast<EmotionLabel>(rng.below(kEmotionClasses));
    for (const char* who : {"x", "y", "z"}) AnnotationStore::append(p, {"t" + std::to_string(i), who, label, 0});
  }
  AnnotationStore::append(p, {"extra", "x", EmotionLabel::Joy, 0});  // not shared, ignored
  const auto s = agreement_report(p);
  EXPECT_EQ(s.annotators, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(s.items.size(), 30u);
  EXPECT_EQ(s.pairwise.size(), 3u);
  EXPECT_EQ(s.mean_pairwise, 1.0);
  EXPECT_EQ(s.fleiss, 1.0);
  std::size_t total = 0;
  for (auto c : s.majority_counts) total += c;
  EXPECT_EQ(total, 30u);
}

TEST(Agreement, MajorityTiesGoToLowestCode) {
  const std::vector<std::size_t> tie = {0, 1, 0, 1, 0, 0, 0};
  EXPECT_EQ(majority_label(tie), 1u);
  const std::vector<std::size_t> three = {1, 0, 0, 0, 0, 2, 0};
  EXPECT_EQ(majority_label(three), 5u);
}

TEST(Agreement, NeedsTwoAnnotators) {
  TempDir dir;
  AnnotationStore::append(dir / "s.csv", {"t1", "solo", EmotionLabel::Joy, 0});
  try {
    agreement_report(dir / "s.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientAnnotators);
  }
}
