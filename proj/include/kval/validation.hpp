#pragma once

#include "kval/autodiff.hpp"
#include "kval/candidates.hpp"
#include "kval/types.hpp"

#include <string>
#include <vector>

namespace kval {

/// One hidden layer with a smooth nonlinearity, then a linear output.
struct FfnParams {
  Mat w1;  // hidden x in
  Vec b1;
  Mat w2;  // out x hidden
  Vec b2;

  static FfnParams init(int in_dim, int hidden_dim, int out_dim, SplitMix64& rng);
  void validate() const;
};

void register_ffn_params(ParamStore& store, const std::string& prefix,
                         int in_dim, int hidden_dim, int out_dim,
                         SplitMix64& rng);
FfnParams ffn_params_from_store(const ParamStore& store, const std::string& prefix);

namespace ad {
/// w2 * gelu(w1 * x + b1) + b2 over tape values, reading `<prefix>.{w1,b1,w2,b2}`.
Value ffn_node(Tape& tape, Value x, const std::string& prefix);
}  // namespace ad

/// sigmoid(FFN(k + z)) over the vocabulary.
Vec predict_source(const Vec& knowledge_emb, const Vec& joint, const FfnParams& head);

/// Elementwise max over the per-source prediction vectors.
Vec fuse_predictions(const std::vector<Vec>& predictions);

/// Componentwise sum of the statement vector and the answer word vector.
Vec answer_embedding(const Vec& statement_vector, const Vec& answer_word_vector);

/// sigmoid(FFN(f_ans(a) o k(a'))) where o is the elementwise product.
double validation_score(const Vec& answer_emb, const Vec& knowledge_emb,
                        const FfnParams& head);

enum class DecisionRule { VqaOnly, VqaWeightedValidation };

std::string to_string(DecisionRule rule);

struct DecisionRecord {
  QuestionId question_id = 0;
  std::vector<std::string> candidates;
  Vec prediction;              // fused P over the vocabulary
  Mat validation;              // fused J over the candidates
  std::vector<bool> consistent;
  DecisionRule rule_used = DecisionRule::VqaOnly;
  std::string final_answer;
};

/// A candidate is consistent when its diagonal validation score strictly
/// dominates its row and column. The validation-weighted rule applies only
/// when the prediction argmax lies inside the candidate set and at least one
/// candidate is consistent; otherwise the prediction argmax wins (over the
/// full vocabulary by default). Ties break by candidate order.
DecisionRecord consistency_decision(const Vec& prediction, const Mat& validation,
                                    const std::vector<std::string>& candidates,
                                    const AnswerVocabulary& vocab,
                                    bool fallback_full_vocab = true);

/// Graded credit against exactly five annotations: 0, 1, or 2+ exact
/// normalized matches give 0.0, 0.6, 1.0.
double vqa_soft_score(const std::string& answer,
                      const std::vector<std::string>& annotations);

/// Core validation loss over one candidate set: for each candidate, binary
/// cross-entropy drives the off-diagonal row and column maxima of J toward 0
/// and the diagonal toward the candidate's soft score. Numeric route used as
/// an independent check of the training graph.
double validation_loss(const Mat& validation, const Vec& soft_scores,
                       double eps = 1e-7);

}  // namespace kval
