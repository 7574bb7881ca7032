#include "kval/validation.hpp"

#include "kval/text.hpp"

#include <algorithm>
#include <cmath>

namespace kval {

FfnParams FfnParams::init(int in_dim, int hidden_dim, int out_dim, SplitMix64& rng) {
  auto xavier = [&rng](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = bound * rng.next_signed_unit();
    return m;
  };
  FfnParams p;
  p.w1 = xavier(hidden_dim, in_dim);
  p.b1 = Vec::Zero(hidden_dim);
  p.w2 = xavier(out_dim, hidden_dim);
  p.b2 = Vec::Zero(out_dim);
  return p;
}

void FfnParams::validate() const {
  if (w1.rows() != b1.size() || w2.cols() != w1.rows() || w2.rows() != b2.size())
    throw UsageError("ffn: inconsistent layer shapes");
}

void register_ffn_params(ParamStore& store, const std::string& prefix,
                         int in_dim, int hidden_dim, int out_dim,
                         SplitMix64& rng) {
  store.create_xavier(prefix + ".w1", hidden_dim, in_dim, rng);
  store.create(prefix + ".b1", hidden_dim, 1);
  store.create_xavier(prefix + ".w2", out_dim, hidden_dim, rng);
  store.create(prefix + ".b2", out_dim, 1);
}

FfnParams ffn_params_from_store(const ParamStore& store, const std::string& prefix) {
  FfnParams p;
  p.w1 = store.get(prefix + ".w1");
  p.b1 = store.get(prefix + ".b1").col(0);
  p.w2 = store.get(prefix + ".w2");
  p.b2 = store.get(prefix + ".b2").col(0);
  p.validate();
  return p;
}

namespace ad {

Value ffn_node(Tape& tape, Value x, const std::string& prefix) {
  Value hidden = gelu(add(matmul(tape.param(prefix + ".w1"), x),
                          tape.param(prefix + ".b1")));
  return add(matmul(tape.param(prefix + ".w2"), hidden), tape.param(prefix + ".b2"));
}

}  // namespace ad

namespace {

// Shared eager route through the tape ops.
Vec ffn_sigmoid(const Vec& x, const FfnParams& head) {
  head.validate();
  if (x.size() != head.w1.cols()) throw UsageError("ffn: input dimension mismatch");
  ParamStore store;
  store.create("h.w1", head.w1.rows(), head.w1.cols()) = head.w1;
  store.create("h.b1", head.b1.size(), 1) = head.b1;
  store.create("h.w2", head.w2.rows(), head.w2.cols()) = head.w2;
  store.create("h.b2", head.b2.size(), 1) = head.b2;
  ad::Tape tape(&store);
  ad::Value out = ad::sigmoid(ad::ffn_node(tape, tape.constant(x), "h"));
  return tape.value(out).col(0);
}

}  // namespace

Vec predict_source(const Vec& knowledge_emb, const Vec& joint, const FfnParams& head) {
  if (knowledge_emb.size() != joint.size())
    throw UsageError("predict_source: embedding dimensions disagree");
  return ffn_sigmoid(knowledge_emb + joint, head);
}

Vec fuse_predictions(const std::vector<Vec>& predictions) {
  if (predictions.empty()) throw UsageError("fuse_predictions: no sources");
  Vec fused = predictions[0];
  for (std::size_t k = 1; k < predictions.size(); ++k) {
    if (predictions[k].size() != fused.size())
      throw UsageError("fuse_predictions: prediction lengths disagree");
    fused = fused.cwiseMax(predictions[k]);
  }
  return fused;
}

Vec answer_embedding(const Vec& statement_vector, const Vec& answer_word_vector) {
  if (statement_vector.size() != answer_word_vector.size())
    throw UsageError("answer_embedding: dimension mismatch");
  return statement_vector + answer_word_vector;
}

double validation_score(const Vec& answer_emb, const Vec& knowledge_emb,
                        const FfnParams& head) {
  if (answer_emb.size() != knowledge_emb.size())
    throw UsageError("validation_score: dimension mismatch");
  return ffn_sigmoid(answer_emb.cwiseProduct(knowledge_emb), head)[0];
}

std::string to_string(DecisionRule rule) {
  return rule == DecisionRule::VqaOnly ? "vqa_only" : "vqa_weighted_validation";
}

DecisionRecord consistency_decision(const Vec& prediction, const Mat& validation,
                                    const std::vector<std::string>& candidates,
                                    const AnswerVocabulary& vocab,
                                    bool fallback_full_vocab) {
  const int n = static_cast<int>(candidates.size());
  if (n < 1) throw UsageError("consistency_decision: no candidates");
  if (validation.rows() != n || validation.cols() != n)
    throw UsageError("consistency_decision: validation matrix is not |A|x|A|");
  if (prediction.size() != vocab.size())
    throw UsageError("consistency_decision: prediction not over the vocabulary");

  std::vector<int> vocab_idx(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    vocab_idx[static_cast<std::size_t>(a)] = vocab.index_of(candidates[static_cast<std::size_t>(a)]);
    if (vocab_idx[static_cast<std::size_t>(a)] < 0)
      throw UsageError("consistency_decision: candidate '" +
                       candidates[static_cast<std::size_t>(a)] + "' not in vocabulary");
  }

  DecisionRecord record;
  record.candidates = candidates;
  record.prediction = prediction;
  record.validation = validation;
  record.consistent.assign(static_cast<std::size_t>(n), true);
  for (int a = 0; a < n; ++a) {
    for (int other = 0; other < n; ++other) {
      if (other == a) continue;
      // Strict dominance of the diagonal over its row and column.
      if (!(validation(a, a) > validation(other, a) &&
            validation(a, a) > validation(a, other))) {
        record.consistent[static_cast<std::size_t>(a)] = false;
        break;
      }
    }
  }

  int p_argmax = 0;
  for (int i = 1; i < vocab.size(); ++i)
    if (prediction[i] > prediction[p_argmax]) p_argmax = i;
  const bool top1_in_set =
      std::find(vocab_idx.begin(), vocab_idx.end(), p_argmax) != vocab_idx.end();
  const bool any_consistent =
      std::any_of(record.consistent.begin(), record.consistent.end(),
                  [](bool c) { return c; });

  if (top1_in_set && any_consistent) {
    record.rule_used = DecisionRule::VqaWeightedValidation;
    int best = -1;
    double best_score = 0.0;
    for (int a = 0; a < n; ++a) {
      if (!record.consistent[static_cast<std::size_t>(a)]) continue;
      const double score =
          validation(a, a) * prediction[vocab_idx[static_cast<std::size_t>(a)]];
      if (best < 0 || score > best_score) {
        best = a;
        best_score = score;
      }
    }
    record.final_answer = candidates[static_cast<std::size_t>(best)];
  } else {
    record.rule_used = DecisionRule::VqaOnly;
    if (fallback_full_vocab) {
      record.final_answer = vocab.answer(p_argmax);
    } else {
      int best = 0;
      for (int a = 1; a < n; ++a)
        if (prediction[vocab_idx[static_cast<std::size_t>(a)]] >
            prediction[vocab_idx[static_cast<std::size_t>(best)]])
          best = a;
      record.final_answer = candidates[static_cast<std::size_t>(best)];
    }
  }
  return record;
}

double vqa_soft_score(const std::string& answer,
                      const std::vector<std::string>& annotations) {
  if (annotations.size() != 5)
    throw DataError("vqa_soft_score: expected exactly 5 annotations, got " +
                    std::to_string(annotations.size()));
  const std::string needle = normalize_text(answer);
  int matches = 0;
  for (const auto& annotation : annotations)
    if (normalize_text(annotation) == needle) ++matches;
  if (matches == 0) return 0.0;
  if (matches == 1) return 0.6;
  return 1.0;
}

double validation_loss(const Mat& validation, const Vec& soft_scores, double eps) {
  const int n = static_cast<int>(validation.rows());
  if (validation.cols() != n) throw UsageError("validation_loss: matrix not square");
  if (soft_scores.size() != n)
    throw UsageError("validation_loss: soft scores not parallel to candidates");
  auto clamp = [eps](double p) { return std::clamp(p, eps, 1.0 - eps); };
  auto bce = [&](double p, double t) {
    const double c = clamp(p);
    return -(t * std::log(c) + (1.0 - t) * std::log(1.0 - c));
  };
  double total = 0.0;
  for (int t = 0; t < n; ++t) {
    if (n > 1) {
      double col_max = -1.0, row_max = -1.0;
      for (int other = 0; other < n; ++other) {
        if (other == t) continue;
        col_max = std::max(col_max, validation(other, t));
        row_max = std::max(row_max, validation(t, other));
      }
      total += bce(col_max, 0.0);
      total += bce(row_max, 0.0);
    }
    total += bce(validation(t, t), soft_scores[t]);
  }
  return total;
}

}  // namespace kval
