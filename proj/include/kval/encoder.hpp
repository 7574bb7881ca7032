#pragma once

#include "kval/phrases.hpp"
#include "kval/text.hpp"
#include "kval/types.hpp"

#include <map>
#include <memory>

namespace kval {

struct EncoderOutput {
  Mat token_features;   // |q| x d, |q| capped at max_question_tokens
  Mat visual_features;  // objects (plus one whole-image row) x d
  Vec joint;            // shared visual-textual summary
};

/// Joint question/image encoder interface. The trained model this stands in
/// for is external; the shipped fixture is deterministic and parameter-free.
class MultimodalEncoder {
 public:
  virtual ~MultimodalEncoder() = default;
  virtual int dimension() const = 0;
  virtual int max_question_tokens() const = 0;
  virtual EncoderOutput encode(const std::vector<Token>& question_tokens,
                               const std::vector<DetectedObject>& objects) const = 0;
};

/// Hashed token vectors plus a seeded projection of object features; the
/// joint vector is the normalized sum of the mean text and visual rows.
/// Bit-stable across runs and platforms.
class HashingMultimodalEncoder final : public MultimodalEncoder {
 public:
  explicit HashingMultimodalEncoder(int dimension,
                                    std::uint64_t seed = kDefaultHashSeed,
                                    int max_tokens = 23);

  int dimension() const override { return dim_; }
  int max_question_tokens() const override { return max_tokens_; }
  EncoderOutput encode(const std::vector<Token>& question_tokens,
                       const std::vector<DetectedObject>& objects) const override;

  /// Seeded projection from raw object-feature space into the model space.
  /// One fixed matrix per input dimension.
  Vec project_object_feature(const Vec& feature) const;

  const HashingTokenEncoder& token_encoder() const { return tokens_; }

 private:
  const Mat& projection_for(Eigen::Index in_dim) const;

  int dim_;
  std::uint64_t seed_;
  int max_tokens_;
  HashingTokenEncoder tokens_;
  mutable std::map<Eigen::Index, Mat> projections_;
};

/// Mean of the encoder's token vectors; zero when the text has no tokens.
Vec sentence_embedding(const std::string& text, const TokenEncoder& encoder);

/// Mean word vector of the answer tokens, projected into the model space by
/// a seeded fixed matrix.
class WordVectorProjector {
 public:
  WordVectorProjector(int out_dim, int in_dim, std::uint64_t seed = kDefaultHashSeed);
  Vec project(const Vec& word_vector) const;
  Vec embed(const std::string& text, const WordVectorTable& table) const;

 private:
  Mat projection_;
};

}  // namespace kval
