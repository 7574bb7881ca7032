#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kval/validation.hpp"

#include <cmath>
#include <random>

using namespace kval;

namespace {

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

FfnParams identity_head(int dim) {
  // w1 = I, w2 = I: the head reduces to gelu followed by the output layer.
  FfnParams p;
  p.w1 = Mat::Identity(dim, dim);
  p.b1 = Vec::Zero(dim);
  p.w2 = Mat::Identity(dim, dim);
  p.b2 = Vec::Zero(dim);
  return p;
}

}  // namespace

TEST_CASE("predict_source with a zero knowledge embedding reduces to the joint path") {
  SplitMix64 rng(3);
  FfnParams head = FfnParams::init(4, 8, 3, rng);
  Vec z(4);
  z << 0.4, -0.2, 0.9, 0.1;
  Vec with_zero = predict_source(Vec::Zero(4), z, head);
  Vec direct = predict_source(z, Vec::Zero(4), head);
  CHECK((with_zero - direct).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i) {
    CHECK(with_zero[i] > 0.0);
    CHECK(with_zero[i] < 1.0);
  }
}

TEST_CASE("predict_source with identity weights is sigmoid of gelu(k + z)") {
  FfnParams head = identity_head(2);
  Vec k(2), z(2);
  k << 0.5, -1.0;
  z << 0.25, 0.5;
  Vec got = predict_source(k, z, head);
  for (int i = 0; i < 2; ++i)
    CHECK(got[i] == doctest::Approx(sigmoid_scalar(gelu_scalar(k[i] + z[i])))
                        .epsilon(1e-12));
}

TEST_CASE("fuse_predictions is the elementwise maximum") {
  Vec a(2), b(2);
  a << 0.2, 0.9;
  b << 0.8, 0.1;
  Vec fused = fuse_predictions({a, b});
  CHECK(fused[0] == 0.8);
  CHECK(fused[1] == 0.9);
  CHECK((fuse_predictions({a}) - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(fuse_predictions({}), UsageError);
}

TEST_CASE("fused predictions dominate every source elementwise") {
  std::mt19937 rng(17);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<Vec> sources;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k) {
      Vec v(6);
      for (int i = 0; i < 6; ++i) v[i] = static_cast<double>(rng() % 1000) / 1000.0;
      sources.push_back(v);
    }
    Vec fused = fuse_predictions(sources);
    for (const Vec& v : sources)
      CHECK((fused - v).minCoeff() >= 0.0);
  }
}

TEST_CASE("answer_embedding is the componentwise sum") {
  Vec s(3), w(3);
  s << 1, 2, 3;
  w << 0.5, -0.5, 0.25;
  CHECK((answer_embedding(s, w) - Vec((Vec(3) << 1.5, 1.5, 3.25).finished()))
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(answer_embedding(Vec::Zero(3), w) == w);
  CHECK(answer_embedding(Vec::Zero(3), Vec::Zero(3)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(answer_embedding(s, Vec::Zero(2)), UsageError);
}

TEST_CASE("validation_score is sigmoid of the head over the elementwise product") {
  FfnParams head = identity_head(2);
  // Collapse the output layer to a sum so the expectation is hand-checkable.
  head.w2 = Mat::Ones(1, 2);
  head.b2 = Vec::Zero(1);
  Vec f(2), k(2);
  f << 0.5, 2.0;
  k << 1.5, -0.25;
  const double expect =
      sigmoid_scalar(gelu_scalar(0.5 * 1.5) + gelu_scalar(2.0 * -0.25));
  CHECK(validation_score(f, k, head) == doctest::Approx(expect).epsilon(1e-12));

  // Either input zero annihilates the product: a learned constant remains.
  const double constant = validation_score(Vec::Zero(2), k, head);
  CHECK(constant == doctest::Approx(sigmoid_scalar(0.0)));
  CHECK(validation_score(f, Vec::Zero(2), head) == doctest::Approx(constant));
  // Sigmoid range.
  CHECK(constant > 0.0);
  CHECK(constant < 1.0);
}

TEST_CASE("decision rule: fully consistent matrix picks the weighted argmax") {
  AnswerVocabulary vocab({"a", "b", "c", "d"});
  Mat j = Mat::Constant(3, 3, 0.1);
  j.diagonal().setConstant(0.9);
  Vec p(4);
  p << 0.8, 0.6, 0.7, 0.1;
  auto record = consistency_decision(p, j, {"a", "b", "c"}, vocab);
  CHECK(record.rule_used == DecisionRule::VqaWeightedValidation);
  for (bool c : record.consistent) CHECK(c);
  // J(a,a)P(a) = .72, .54, .63 — candidate "a" wins.
  CHECK(record.final_answer == "a");
}

TEST_CASE("decision rule: prediction argmax outside the candidates forces vqa_only") {
  AnswerVocabulary vocab({"a", "b", "c", "d"});
  Mat j = Mat::Constant(2, 2, 0.1);
  j.diagonal().setConstant(0.9);
  Vec p(4);
  p << 0.1, 0.2, 0.3, 0.9;  // argmax "d" is not a candidate
  auto record = consistency_decision(p, j, {"a", "b"}, vocab);
  CHECK(record.rule_used == DecisionRule::VqaOnly);
  CHECK(record.final_answer == "d");  // full-vocabulary fallback
  auto restricted = consistency_decision(p, j, {"a", "b"}, vocab,
                                         /*fallback_full_vocab=*/false);
  CHECK(restricted.final_answer == "b");
}

TEST_CASE("decision rule: no consistent candidate forces vqa_only") {
  AnswerVocabulary vocab({"a", "b"});
  Mat j = Mat::Constant(2, 2, 0.5);  // ties everywhere: strict dominance fails
  Vec p(2);
  p << 0.9, 0.1;
  auto record = consistency_decision(p, j, {"a", "b"}, vocab);
  CHECK(record.rule_used == DecisionRule::VqaOnly);
  CHECK(record.final_answer == "a");
  for (bool c : record.consistent) CHECK(!c);
}

TEST_CASE("decision rule: a single candidate with its argmax in the set wins") {
  AnswerVocabulary vocab({"a", "b"});
  Mat j = Mat::Constant(1, 1, 0.42);
  Vec p(2);
  p << 0.9, 0.1;
  auto record = consistency_decision(p, j, {"a"}, vocab);
  CHECK(record.rule_used == DecisionRule::VqaWeightedValidation);
  CHECK(record.final_answer == "a");
  CHECK(record.consistent[0]);
}

TEST_CASE("decision is invariant to scaling the validation matrix") {
  AnswerVocabulary vocab({"a", "b", "c"});
  std::mt19937 rng(23);
  for (int iter = 0; iter < 200; ++iter) {
    Mat j(3, 3);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        j(r, c) = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    Vec p(3);
    for (int i = 0; i < 3; ++i) p[i] = static_cast<double>(rng() % 1000) / 1000.0;
    auto base = consistency_decision(p, j, {"a", "b", "c"}, vocab);
    const double scale = 0.1 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    auto scaled = consistency_decision(p, Mat(scale * j), {"a", "b", "c"}, vocab);
    CHECK(base.consistent == scaled.consistent);
    CHECK(base.rule_used == scaled.rule_used);
    CHECK(base.final_answer == scaled.final_answer);
  }
}

TEST_CASE("soft score mapping and annotation-count guard") {
  std::vector<std::string> annotations = {"dog", "cat", "dog", "bird", "fish"};
  CHECK(vqa_soft_score("horse", annotations) == 0.0);
  CHECK(vqa_soft_score("cat", annotations) == 0.6);
  CHECK(vqa_soft_score("dog", annotations) == 1.0);
  CHECK(vqa_soft_score("DOG!", annotations) == 1.0);  // normalized comparison
  CHECK_THROWS_AS(vqa_soft_score("dog", {"dog", "dog"}), DataError);
}

TEST_CASE("soft score is invariant to annotation order") {
  std::vector<std::string> annotations = {"a", "b", "a", "c", "d"};
  std::mt19937 rng(31);
  for (int iter = 0; iter < 50; ++iter) {
    auto shuffled = annotations;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(vqa_soft_score("a", shuffled) == 1.0);
    CHECK(vqa_soft_score("b", shuffled) == 0.6);
    CHECK(vqa_soft_score("x", shuffled) == 0.0);
  }
}

TEST_CASE("validation loss matches the hand-computed two-candidate case") {
  Mat j(2, 2);
  j << 0.8, 0.3, 0.2, 0.6;
  Vec soft(2);
  soft << 1.0, 0.0;
  // Per candidate: off-column max vs 0, off-row max vs 0, diagonal vs s(a):
  //   3(-ln .8) + 2(-ln .7) + (-ln .4)
  const double expect = 3 * -std::log(0.8) + 2 * -std::log(0.7) + -std::log(0.4);
  CHECK(validation_loss(j, soft) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect == doctest::Approx(2.2990712736).epsilon(1e-9));
}

TEST_CASE("validation loss approaches zero only in the perfect-fit limit") {
  Mat j(2, 2);
  const double eps = 1e-7;
  j << 1.0 - eps, eps, eps, 1.0 - eps;
  Vec soft = Vec::Ones(2);
  CHECK(validation_loss(j, soft) == doctest::Approx(0.0).epsilon(1e-5));

  std::mt19937 rng(41);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = 1 + static_cast<int>(rng() % 4);
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        m(r, c) = 0.01 + 0.98 * static_cast<double>(rng() % 1000) / 1000.0;
    Vec s(n);
    for (int i = 0; i < n; ++i) {
      const int level = static_cast<int>(rng() % 3);
      s[i] = level == 0 ? 0.0 : (level == 1 ? 0.6 : 1.0);
    }
    CHECK(validation_loss(m, s) >= 0.0);
  }
}
