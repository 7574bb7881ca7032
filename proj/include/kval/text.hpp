#pragma once

#include "kval/types.hpp"
#include "kval/util.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kval {

struct Token {
  std::string surface;  // lowercase, no whitespace
  int position = 0;     // character offset of the first byte in the source text
};

/// Lowercased word tokens split on non-alphanumeric characters, in order.
std::vector<Token> tokenize(std::string_view text);

/// Lowercase tokens joined by single spaces; used as a dedup/compare key.
std::string normalize_text(std::string_view text);

std::string join_tokens(const std::vector<Token>& tokens, std::size_t begin,
                        std::size_t end);

enum class OovPolicy { ZeroVector, HashFallback };

inline constexpr std::uint64_t kDefaultHashSeed = 0x6b76616cull;  // arbitrary fixed stream

/// Static word vectors with a total lookup function: out-of-vocabulary words
/// resolve to a zero vector or a deterministic hashed unit vector.
class WordVectorTable {
 public:
  explicit WordVectorTable(int dimension,
                           OovPolicy policy = OovPolicy::HashFallback,
                           std::uint64_t hash_seed = kDefaultHashSeed);

  /// Parses `word v1 v2 ... vd` lines; rejects wrong arity with the line number.
  static WordVectorTable load(const std::filesystem::path& file,
                              OovPolicy policy = OovPolicy::HashFallback,
                              std::uint64_t hash_seed = kDefaultHashSeed);

  void insert(const std::string& word, Vec v);
  Vec lookup(std::string_view word) const;
  bool contains(std::string_view word) const;

  int dimension() const { return dim_; }
  OovPolicy oov_policy() const { return policy_; }
  std::size_t size() const { return entries_.size(); }

 private:
  int dim_;
  OovPolicy policy_;
  std::uint64_t hash_seed_;
  std::unordered_map<std::string, Vec> entries_;
};

/// Maps a token sequence to one fixed-dimension vector per token.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual int dimension() const = 0;
  virtual bool deterministic() const = 0;
  /// One row per token.
  virtual Mat encode(const std::vector<Token>& tokens) const = 0;
};

/// Position-independent encoder backed by hashed unit vectors. Stands in for
/// a contextual model; bit-identical across runs and platforms.
class HashingTokenEncoder final : public TokenEncoder {
 public:
  explicit HashingTokenEncoder(int dimension,
                               std::uint64_t seed = kDefaultHashSeed)
      : dim_(dimension), seed_(seed) {
    if (dimension <= 0) throw UsageError("HashingTokenEncoder: dimension must be positive");
  }

  int dimension() const override { return dim_; }
  bool deterministic() const override { return true; }
  Mat encode(const std::vector<Token>& tokens) const override;

  Vec encode_word(std::string_view word) const {
    return hashed_unit_vector(word, dim_, seed_);
  }

 private:
  int dim_;
  std::uint64_t seed_;
};

/// Standard cosine; 0 by convention when either vector is all-zero.
template <typename DerivedA, typename DerivedB>
Scalar cosine(const Eigen::MatrixBase<DerivedA>& u,
              const Eigen::MatrixBase<DerivedB>& v) {
  if (u.size() != v.size())
    throw UsageError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()) + ")");
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv);
}

/// For each query token, the max cosine between its word vector and any
/// sentence token's word vector; returns the mean of these maxima.
Scalar mean_recall(const std::vector<Token>& query,
                   const std::vector<Token>& sentence,
                   const WordVectorTable& table);

struct MatchScore {
  Scalar precision = 0.0;
  Scalar recall = 0.0;
  Scalar f1 = 0.0;
};

/// Greedy max-similarity token matching of encoder embeddings; recall is
/// averaged over reference tokens, precision over candidate tokens.
MatchScore greedy_match(const std::vector<Token>& candidate,
                        const std::vector<Token>& reference,
                        const TokenEncoder& encoder);

}  // namespace kval
