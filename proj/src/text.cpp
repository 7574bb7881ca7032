#include "kval/text.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace kval {

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::string current;
  int start = 0;
  for (int i = 0; i <= static_cast<int>(text.size()); ++i) {
    const bool at_end = i == static_cast<int>(text.size());
    const unsigned char c = at_end ? ' ' : static_cast<unsigned char>(text[i]);
    if (!at_end && std::isalnum(c)) {
      if (current.empty()) start = i;
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(Token{current, start});
      current.clear();
    }
  }
  return tokens;
}

std::string normalize_text(std::string_view text) {
  const auto tokens = tokenize(text);
  return join_tokens(tokens, 0, tokens.size());
}

std::string join_tokens(const std::vector<Token>& tokens, std::size_t begin,
                        std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end && i < tokens.size(); ++i) {
    if (!out.empty()) out.push_back(' ');
    out += tokens[i].surface;
  }
  return out;
}

WordVectorTable::WordVectorTable(int dimension, OovPolicy policy,
                                 std::uint64_t hash_seed)
    : dim_(dimension), policy_(policy), hash_seed_(hash_seed) {
  if (dimension <= 0) throw UsageError("WordVectorTable: dimension must be positive");
}

WordVectorTable WordVectorTable::load(const std::filesystem::path& file,
                                      OovPolicy policy,
                                      std::uint64_t hash_seed) {
  std::ifstream in(file);
  if (!in) throw DataError("word vectors: cannot open " + file.string());
  std::string line;
  int line_no = 0;
  int dim = -1;
  std::vector<std::pair<std::string, Vec>> parsed;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    std::vector<Scalar> values;
    Scalar x;
    while (ss >> x) values.push_back(x);
    if (word.empty() || values.empty())
      throw DataError("word vectors: malformed line " + std::to_string(line_no) +
                      " in " + file.string());
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim)
      throw DataError("word vectors: line " + std::to_string(line_no) + " has " +
                      std::to_string(values.size()) + " components, expected " +
                      std::to_string(dim));
    parsed.emplace_back(word, Eigen::Map<Vec>(values.data(), dim));
  }
  if (dim < 0) throw DataError("word vectors: empty file " + file.string());
  WordVectorTable table(dim, policy, hash_seed);
  for (auto& [word, vec] : parsed) table.insert(word, std::move(vec));
  return table;
}

void WordVectorTable::insert(const std::string& word, Vec v) {
  if (v.size() != dim_)
    throw UsageError("WordVectorTable: vector for '" + word + "' has " +
                     std::to_string(v.size()) + " components, expected " +
                     std::to_string(dim_));
  entries_[word] = std::move(v);
}

Vec WordVectorTable::lookup(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  if (it != entries_.end()) return it->second;
  if (policy_ == OovPolicy::ZeroVector) return Vec::Zero(dim_);
  return hashed_unit_vector(word, dim_, hash_seed_);
}

bool WordVectorTable::contains(std::string_view word) const {
  return entries_.count(std::string(word)) > 0;
}

Mat HashingTokenEncoder::encode(const std::vector<Token>& tokens) const {
  Mat out(static_cast<Eigen::Index>(tokens.size()), dim_);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = hashed_unit_vector(tokens[static_cast<std::size_t>(i)].surface,
                                    dim_, seed_)
                     .transpose();
  return out;
}

Scalar mean_recall(const std::vector<Token>& query,
                   const std::vector<Token>& sentence,
                   const WordVectorTable& table) {
  if (query.empty()) throw UsageError("mean_recall: empty query");
  if (sentence.empty()) throw UsageError("mean_recall: empty sentence");
  std::vector<Vec> sent_vecs;
  sent_vecs.reserve(sentence.size());
  for (const Token& t : sentence) sent_vecs.push_back(table.lookup(t.surface));
  Scalar sum = 0.0;
  for (const Token& q : query) {
    const Vec qv = table.lookup(q.surface);
    Scalar best = -1.0;
    for (const Vec& sv : sent_vecs) best = std::max(best, cosine(qv, sv));
    sum += best;
  }
  return sum / static_cast<Scalar>(query.size());
}

namespace {

// Mean over `rows` of the max cosine against `others`.
Scalar greedy_side(const Mat& rows, const Mat& others) {
  Scalar sum = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Scalar best = -1.0;
    for (Eigen::Index j = 0; j < others.rows(); ++j)
      best = std::max(best, cosine(rows.row(i), others.row(j)));
    sum += best;
  }
  return sum / static_cast<Scalar>(rows.rows());
}

}  // namespace

MatchScore greedy_match(const std::vector<Token>& candidate,
                        const std::vector<Token>& reference,
                        const TokenEncoder& encoder) {
  if (candidate.empty()) throw UsageError("greedy_match: empty candidate");
  if (reference.empty()) throw UsageError("greedy_match: empty reference");
  const Mat cand = encoder.encode(candidate);
  const Mat ref = encoder.encode(reference);
  MatchScore s;
  s.recall = greedy_side(ref, cand);
  s.precision = greedy_side(cand, ref);
  s.f1 = (s.precision + s.recall > 0.0)
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace kval
