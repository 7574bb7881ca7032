#include "kval/candidates.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace kval {

using nlohmann::json;

AnswerVocabulary::AnswerVocabulary(std::vector<std::string> answers)
    : answers_(std::move(answers)) {
  for (int i = 0; i < static_cast<int>(answers_.size()); ++i) {
    if (!index_.emplace(answers_[static_cast<std::size_t>(i)], i).second)
      throw DataError("vocabulary: duplicate answer '" +
                      answers_[static_cast<std::size_t>(i)] + "'");
  }
}

int AnswerVocabulary::index_of(const std::string& answer) const {
  auto it = index_.find(answer);
  return it == index_.end() ? -1 : it->second;
}

const std::string& AnswerVocabulary::answer(int index) const {
  if (index < 0 || index >= size()) throw UsageError("vocabulary: index out of range");
  return answers_[static_cast<std::size_t>(index)];
}

FileScorer::FileScorer(const std::filesystem::path& jsonl,
                       const AnswerVocabulary& vocab)
    : vocab_(vocab) {
  std::ifstream in(jsonl);
  if (!in) throw DataError("scorer: cannot open " + jsonl.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("scorer: invalid JSON at line " + std::to_string(line_no) +
                      ": " + e.what());
    }
    const auto qid = record.at("question_id").get<QuestionId>();
    Vec scores = Vec::Zero(vocab_.size());
    for (const auto& [answer, value] : record.at("scores").items()) {
      const int idx = vocab_.index_of(answer);
      if (idx >= 0) scores[idx] = value.get<double>();
    }
    scores_[qid] = std::move(scores);
  }
}

Vec FileScorer::score(QuestionId question_id) const {
  auto it = scores_.find(question_id);
  if (it == scores_.end()) return Vec::Zero(vocab_.size());
  return it->second;
}

std::vector<ScoredAnswer> top_k_candidates(const Vec& scores,
                                           const AnswerVocabulary& vocab, int k) {
  if (scores.size() != vocab.size())
    throw UsageError("top_k_candidates: score length does not match vocabulary");
  if (k < 1 || k > vocab.size())
    throw UsageError("top_k_candidates: k out of range");
  std::vector<int> order(static_cast<std::size_t>(vocab.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] > scores[b];  // stable keeps vocabulary position on ties
  });
  std::vector<ScoredAnswer> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    out.push_back(ScoredAnswer{vocab.answer(order[static_cast<std::size_t>(i)]),
                               scores[order[static_cast<std::size_t>(i)]],
                               order[static_cast<std::size_t>(i)]});
  return out;
}

}  // namespace kval
