#pragma once

#include "kval/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace kval {

/// Ordered answer list with contiguous positions and no duplicates.
class AnswerVocabulary {
 public:
  explicit AnswerVocabulary(std::vector<std::string> answers);

  int index_of(const std::string& answer) const;  // -1 when absent
  const std::string& answer(int index) const;
  int size() const { return static_cast<int>(answers_.size()); }
  const std::vector<std::string>& answers() const { return answers_; }

 private:
  std::vector<std::string> answers_;
  std::map<std::string, int> index_;
};

/// Scores every vocabulary answer for a question. The shipped fixture reads
/// precomputed confidences from a file; a trained scorer can be substituted.
class BaseScorer {
 public:
  virtual ~BaseScorer() = default;
  virtual Vec score(QuestionId question_id) const = 0;
};

/// JSONL fixture: one `{question_id, scores: {answer: real}}` record per
/// question; answers absent from the record score 0.
class FileScorer final : public BaseScorer {
 public:
  FileScorer(const std::filesystem::path& jsonl, const AnswerVocabulary& vocab);
  Vec score(QuestionId question_id) const override;

 private:
  const AnswerVocabulary& vocab_;
  std::map<QuestionId, Vec> scores_;
};

struct ScoredAnswer {
  std::string answer;
  double score = 0.0;
  int vocab_index = -1;
};

/// The k highest-scoring answers in descending order; ties break by
/// vocabulary position.
std::vector<ScoredAnswer> top_k_candidates(const Vec& scores,
                                           const AnswerVocabulary& vocab, int k);

}  // namespace kval
