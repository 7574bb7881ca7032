#pragma once

#include "kval/autodiff.hpp"
#include "kval/types.hpp"

#include <string>
#include <vector>

namespace kval {

/// Scaled dot-product multi-head attention parameters. Queries live in the
/// model dimension d; keys and values may have their own input dimension.
struct MHAttParams {
  int head_count = 8;
  Mat wq, wk, wv, wo;  // wq: dxd, wk/wv: dxd_k, wo: dxd
  Vec bq, bk, bv, bo;

  int model_dim() const { return static_cast<int>(wq.rows()); }
  int key_dim() const { return static_cast<int>(wk.cols()); }
  void validate() const;

  /// Xavier-initialized parameters from a seeded stream.
  static MHAttParams init(int model_dim, int head_count, int key_dim,
                          SplitMix64& rng);
};

/// Registers the attention tensors under `<prefix>.{wq,bq,wk,bk,wv,bv,wo,bo}`.
void register_attention_params(ParamStore& store, const std::string& prefix,
                               int model_dim, int head_count, int key_dim,
                               SplitMix64& rng);

/// Reads attention tensors registered under `prefix` back out of a store.
MHAttParams attention_params_from_store(const ParamStore& store,
                                        const std::string& prefix,
                                        int head_count);

namespace ad {

/// Attention as tape nodes: query is dx1, keys/values are d_k x n column
/// stacks. `prefix` names the parameter tensors in the tape's ParamStore.
Value mhatt_node(Tape& tape, Value query, Value keys, Value values,
                 const std::string& prefix, int head_count);

/// Attentive pooling over a span's token features (n x d): a learned scalar
/// score per token, softmax-normalized, then the weighted feature sum (dx1).
/// Parameters: `<prefix>.w` (dx1) and `<prefix>.b` (1x1).
Value attentive_pool_node(Tape& tape, Value span_features,
                          const std::string& prefix);

}  // namespace ad

/// Standard multi-head attention with output projection. Per-head softmax
/// weights sum to one over the keys.
Vec mhatt(const Vec& query, const std::vector<Vec>& keys,
          const std::vector<Vec>& values, const MHAttParams& params);

/// The per-head attention rows (head_count x n) for the same computation.
Mat mhatt_weights(const Vec& query, const std::vector<Vec>& keys,
                  const MHAttParams& params);

struct PoolingParams {
  Vec w;          // one score weight per feature dimension
  double b = 0.0;

  static PoolingParams init(int model_dim, SplitMix64& rng);
};

/// Eager attentive pooling over token_features rows [span_begin, span_end).
Vec attentive_pool(const Mat& token_features, int span_begin, int span_end,
                   const PoolingParams& params);

}  // namespace kval
