// Deterministic synthetic PreparedInstances for model and training tests.
#pragma once

#include "kval/model.hpp"

namespace toy {

inline kval::Mat random_mat(Eigen::Index r, Eigen::Index c, kval::SplitMix64& rng) {
  kval::Mat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.next_signed_unit();
  return m;
}

/// Instance with `n_phrases` phrases (target first), `n_cands` candidates at
/// vocabulary indices 0..n_cands-1, and gold candidate 0 (soft score 1).
inline kval::PreparedInstance make_instance(const kval::ModelConfig& cfg,
                                            int vocab_size, int n_phrases,
                                            int n_cands, std::uint64_t seed) {
  kval::SplitMix64 rng(seed);
  const int d = cfg.model_dim;
  kval::PreparedInstance inst;
  inst.question_id = static_cast<kval::QuestionId>(seed);
  const int tokens = std::max(4, n_phrases + 2);
  inst.token_features = random_mat(tokens, d, rng);
  inst.joint = random_mat(d, 1, rng).col(0);
  for (int p = 0; p < n_phrases; ++p) {
    const int begin = p % tokens;
    const int end = std::min(tokens, begin + 2);
    inst.phrase_spans.emplace_back(begin, end);
  }
  for (kval::KnowledgeSource source : cfg.sources) {
    kval::SourceFeatures feats;
    for (int p = 0; p < n_phrases; ++p) {
      const int k = 1 + static_cast<int>(rng.next() % 3);
      feats.phrase_queries.push_back(random_mat(d, k, rng));
    }
    for (int a = 0; a < n_cands; ++a) {
      const int k = 1 + static_cast<int>(rng.next() % 3);
      feats.answer_queries.push_back(random_mat(d, k, rng));
    }
    inst.features[source] = std::move(feats);
  }
  inst.vocab_soft = kval::Vec::Zero(vocab_size);
  for (int a = 0; a < n_cands; ++a) {
    inst.candidates.push_back("answer" + std::to_string(a));
    inst.candidate_vocab.push_back(a);
    const double soft = a == 0 ? 1.0 : 0.0;
    inst.candidate_soft.push_back(soft);
    inst.vocab_soft[a] = soft;
  }
  inst.answer_vectors.reserve(static_cast<std::size_t>(n_cands));
  for (int a = 0; a < n_cands; ++a)
    inst.answer_vectors.push_back(random_mat(d, 1, rng).col(0));
  return inst;
}

inline kval::AnswerVocabulary make_vocab(int size) {
  std::vector<std::string> answers;
  for (int i = 0; i < size; ++i) answers.push_back("answer" + std::to_string(i));
  return kval::AnswerVocabulary(answers);
}

}  // namespace toy
