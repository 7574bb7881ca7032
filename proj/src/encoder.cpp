#include "kval/encoder.hpp"

namespace kval {

namespace {

Mat seeded_projection(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Mat m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      m(i, j) = scale * rng.next_signed_unit();
  return m;
}

}  // namespace

HashingMultimodalEncoder::HashingMultimodalEncoder(int dimension,
                                                   std::uint64_t seed,
                                                   int max_tokens)
    : dim_(dimension), seed_(seed), max_tokens_(max_tokens),
      tokens_(dimension, seed) {
  if (dimension <= 0) throw UsageError("encoder: dimension must be positive");
  if (max_tokens <= 0) throw UsageError("encoder: token cap must be positive");
}

const Mat& HashingMultimodalEncoder::projection_for(Eigen::Index in_dim) const {
  auto it = projections_.find(in_dim);
  if (it == projections_.end()) {
    it = projections_
             .emplace(in_dim, seeded_projection(dim_, in_dim,
                                                seed_ ^ (0xabcdull + static_cast<std::uint64_t>(in_dim))))
             .first;
  }
  return it->second;
}

Vec HashingMultimodalEncoder::project_object_feature(const Vec& feature) const {
  if (feature.size() == 0) return Vec::Zero(dim_);
  return projection_for(feature.size()) * feature;
}

EncoderOutput HashingMultimodalEncoder::encode(
    const std::vector<Token>& question_tokens,
    const std::vector<DetectedObject>& objects) const {
  std::vector<Token> capped = question_tokens;
  if (static_cast<int>(capped.size()) > max_tokens_)
    capped.resize(static_cast<std::size_t>(max_tokens_));

  EncoderOutput out;
  out.token_features = capped.empty() ? Mat::Zero(0, dim_) : tokens_.encode(capped);

  // One row per object plus a whole-image row (the mean over objects).
  if (objects.empty()) {
    out.visual_features = Mat::Zero(0, dim_);
  } else {
    out.visual_features = Mat::Zero(static_cast<Eigen::Index>(objects.size()) + 1, dim_);
    Vec image_row = Vec::Zero(dim_);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      Vec projected = project_object_feature(objects[i].feature);
      out.visual_features.row(static_cast<Eigen::Index>(i)) = projected.transpose();
      image_row += projected;
    }
    image_row /= static_cast<double>(objects.size());
    out.visual_features.row(out.visual_features.rows() - 1) = image_row.transpose();
  }

  Vec joint = Vec::Zero(dim_);
  if (out.token_features.rows() > 0)
    joint += out.token_features.colwise().mean().transpose();
  if (out.visual_features.rows() > 0)
    joint += out.visual_features.colwise().mean().transpose();
  const double norm = joint.norm();
  out.joint = norm > 0.0 ? Vec(joint / norm) : joint;
  return out;
}

Vec sentence_embedding(const std::string& text, const TokenEncoder& encoder) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return Vec::Zero(encoder.dimension());
  const Mat features = encoder.encode(tokens);
  return features.colwise().mean().transpose();
}

WordVectorProjector::WordVectorProjector(int out_dim, int in_dim,
                                         std::uint64_t seed)
    : projection_(seeded_projection(out_dim, in_dim, seed ^ 0x77ull)) {
  if (out_dim <= 0 || in_dim <= 0)
    throw UsageError("word projector: dimensions must be positive");
}

Vec WordVectorProjector::project(const Vec& word_vector) const {
  if (word_vector.size() != projection_.cols())
    throw UsageError("word projector: input dimension mismatch");
  return projection_ * word_vector;
}

Vec WordVectorProjector::embed(const std::string& text,
                               const WordVectorTable& table) const {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return Vec::Zero(projection_.rows());
  Vec mean = Vec::Zero(table.dimension());
  for (const Token& t : tokens) mean += table.lookup(t.surface);
  mean /= static_cast<double>(tokens.size());
  return project(mean);
}

}  // namespace kval
