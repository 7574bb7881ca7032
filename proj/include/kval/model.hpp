#pragma once

#include "kval/attention.hpp"
#include "kval/autodiff.hpp"
#include "kval/clients.hpp"
#include "kval/validation.hpp"

#include <map>
#include <string>
#include <vector>

namespace kval {

struct ModelConfig {
  int model_dim = 512;
  int head_count = 8;
  int ffn_hidden_mult = 2;
  int max_question_tokens = 23;
  std::vector<KnowledgeSource> sources = {KnowledgeSource::Wikipedia,
                                          KnowledgeSource::ConceptNet,
                                          KnowledgeSource::Images};
  // Granularity ablations: replace an attention level with mean pooling.
  bool mean_pool_phrase = false;
  bool mean_pool_question = false;
  // Attention query for the answer-side aggregation: the joint embedding
  // (as the aggregation equation is written) or the answer embedding f_ans.
  enum class AnswerAttentionQuery { JointEmbedding, AnswerEmbedding };
  AnswerAttentionQuery answer_query = AnswerAttentionQuery::JointEmbedding;
  double aux_vqa_weight = 1.0;
  std::uint64_t init_seed = 42;
};

/// Per-source inputs for one question: the query-level knowledge features.
/// A phrase or answer with nothing retrieved carries a 0-column matrix.
struct SourceFeatures {
  std::vector<Mat> phrase_queries;  // per phrase (target first): d x K
  std::vector<Mat> answer_queries;  // per candidate: d x K
};

struct PreparedInstance {
  QuestionId question_id = 0;
  Mat token_features;  // |q| x d
  Vec joint;           // z
  // Spans into token_features rows, target first; {-1, -1} marks a phrase
  // whose tokens fell outside the encoder window.
  std::vector<std::pair<int, int>> phrase_spans;
  std::map<KnowledgeSource, SourceFeatures> features;
  std::vector<std::string> candidates;
  std::vector<int> candidate_vocab;    // vocabulary index per candidate
  std::vector<double> candidate_soft;  // s(a) per candidate
  std::vector<Vec> answer_vectors;     // f_ans per candidate
  Vec vocab_soft;                      // soft score per vocabulary answer
};

struct SourceEmbeddings {
  std::vector<Vec> phrase_embs;  // per phrase, target first
  std::vector<bool> phrase_empty;
  Vec question_emb;
  std::vector<Vec> answer_embs;  // per candidate
  std::vector<bool> answer_empty;
};

struct ModelOutputs {
  std::map<KnowledgeSource, SourceEmbeddings> embeddings;
  std::map<KnowledgeSource, Vec> source_predictions;  // sigmoid over vocab
  std::map<KnowledgeSource, Mat> source_validations;  // |A| x |A|
  Vec fused_prediction;
  Mat fused_validation;
};

/// Multi-granular knowledge aggregation with per-source parameters, plus the
/// prediction and validation heads and the training loss.
class ValidationModel {
 public:
  ValidationModel(ModelConfig config, int vocab_size);
  ValidationModel(ModelConfig config, int vocab_size, ParamStore params);

  const ModelConfig& config() const { return config_; }
  int vocab_size() const { return vocab_size_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  static std::string source_prefix(KnowledgeSource source);

  /// Eager forward pass (no gradients).
  ModelOutputs forward(const PreparedInstance& instance) const;

  /// Training graph: per-candidate consistency terms plus the auxiliary
  /// per-source prediction losses, as one scalar node.
  ad::Value loss_node(ad::Tape& tape, const PreparedInstance& instance) const;

  double loss(const PreparedInstance& instance) const;

 private:
  struct TapeOutputs {
    std::map<KnowledgeSource, std::vector<ad::Value>> phrase_embs;
    std::map<KnowledgeSource, std::vector<bool>> phrase_empty;
    std::map<KnowledgeSource, ad::Value> question_emb;
    std::map<KnowledgeSource, std::vector<ad::Value>> answer_embs;
    std::map<KnowledgeSource, std::vector<bool>> answer_empty;
    std::map<KnowledgeSource, ad::Value> predictions;
    std::map<KnowledgeSource, std::vector<std::vector<ad::Value>>> validations;
  };

  TapeOutputs build(ad::Tape& tape, const PreparedInstance& instance) const;
  void validate_instance(const PreparedInstance& instance) const;

  ModelConfig config_;
  int vocab_size_;
  ParamStore params_;
};

}  // namespace kval
