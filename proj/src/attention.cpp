#include "kval/attention.hpp"

#include <cmath>

namespace kval {

void MHAttParams::validate() const {
  const auto d = wq.rows();
  if (head_count < 1) throw UsageError("mhatt: head_count must be positive");
  if (d % head_count != 0)
    throw UsageError("mhatt: model_dim must be divisible by head_count");
  if (wq.cols() != d || wo.rows() != d || wo.cols() != d)
    throw UsageError("mhatt: query/output projections must be square in d");
  if (wk.rows() != d || wv.rows() != d || wk.cols() != wv.cols())
    throw UsageError("mhatt: key/value projections disagree");
  if (bq.size() != d || bk.size() != d || bv.size() != d || bo.size() != d)
    throw UsageError("mhatt: bias sizes disagree");
  for (const Mat* m : {&wq, &wk, &wv, &wo})
    if (!m->allFinite()) throw UsageError("mhatt: non-finite projection");
}

MHAttParams MHAttParams::init(int model_dim, int head_count, int key_dim,
                              SplitMix64& rng) {
  auto xavier = [&rng](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = bound * rng.next_signed_unit();
    return m;
  };
  MHAttParams p;
  p.head_count = head_count;
  p.wq = xavier(model_dim, model_dim);
  p.wk = xavier(model_dim, key_dim);
  p.wv = xavier(model_dim, key_dim);
  p.wo = xavier(model_dim, model_dim);
  p.bq = Vec::Zero(model_dim);
  p.bk = Vec::Zero(model_dim);
  p.bv = Vec::Zero(model_dim);
  p.bo = Vec::Zero(model_dim);
  p.validate();
  return p;
}

void register_attention_params(ParamStore& store, const std::string& prefix,
                               int model_dim, int head_count, int key_dim,
                               SplitMix64& rng) {
  if (model_dim % head_count != 0)
    throw UsageError("attention: model_dim must be divisible by head_count");
  store.create_xavier(prefix + ".wq", model_dim, model_dim, rng);
  store.create(prefix + ".bq", model_dim, 1);
  store.create_xavier(prefix + ".wk", model_dim, key_dim, rng);
  store.create(prefix + ".bk", model_dim, 1);
  store.create_xavier(prefix + ".wv", model_dim, key_dim, rng);
  store.create(prefix + ".bv", model_dim, 1);
  store.create_xavier(prefix + ".wo", model_dim, model_dim, rng);
  store.create(prefix + ".bo", model_dim, 1);
}

MHAttParams attention_params_from_store(const ParamStore& store,
                                        const std::string& prefix,
                                        int head_count) {
  MHAttParams p;
  p.head_count = head_count;
  p.wq = store.get(prefix + ".wq");
  p.wk = store.get(prefix + ".wk");
  p.wv = store.get(prefix + ".wv");
  p.wo = store.get(prefix + ".wo");
  p.bq = store.get(prefix + ".bq").col(0);
  p.bk = store.get(prefix + ".bk").col(0);
  p.bv = store.get(prefix + ".bv").col(0);
  p.bo = store.get(prefix + ".bo").col(0);
  p.validate();
  return p;
}

namespace ad {

Value mhatt_node(Tape& tape, Value query, Value keys, Value values,
                 const std::string& prefix, int head_count) {
  const Eigen::Index d = tape.value(query).rows();
  const Eigen::Index n = tape.value(keys).cols();
  if (n < 1) throw UsageError("mhatt: at least one key is required");
  if (tape.value(values).cols() != n)
    throw UsageError("mhatt: key/value counts disagree");
  if (d % head_count != 0)
    throw UsageError("mhatt: model_dim must be divisible by head_count");
  const Eigen::Index dh = d / head_count;
  const double scaling = 1.0 / std::sqrt(static_cast<double>(dh));

  Value q = add(matmul(tape.param(prefix + ".wq"), query), tape.param(prefix + ".bq"));
  Value k = add_col_broadcast(matmul(tape.param(prefix + ".wk"), keys),
                              tape.param(prefix + ".bk"));
  Value v = add_col_broadcast(matmul(tape.param(prefix + ".wv"), values),
                              tape.param(prefix + ".bv"));

  std::vector<Value> mixed;
  mixed.reserve(static_cast<std::size_t>(head_count));
  for (int h = 0; h < head_count; ++h) {
    Value qh = rows(q, h * dh, dh);
    Value kh = rows(k, h * dh, dh);
    Value vh = rows(v, h * dh, dh);
    Value logits = scale(matmul(transpose(qh), kh), scaling);  // 1xn
    Value alpha = softmax_row(logits);
    mixed.push_back(matmul(vh, transpose(alpha)));  // dh x 1
  }
  Value mix = head_count == 1 ? mixed[0] : concat_rows(mixed);
  return add(matmul(tape.param(prefix + ".wo"), mix), tape.param(prefix + ".bo"));
}

Value attentive_pool_node(Tape& tape, Value span_features,
                          const std::string& prefix) {
  const Eigen::Index n = tape.value(span_features).rows();
  if (n < 1) throw UsageError("attentive_pool: empty span");
  Value scores = matmul(span_features, tape.param(prefix + ".w"));  // n x 1
  Value biased = add_scalar_broadcast(scores, tape.param(prefix + ".b"));
  Value alpha = softmax_row(transpose(biased));            // 1 x n
  return matmul(transpose(span_features), transpose(alpha));  // d x 1
}

}  // namespace ad

namespace {

// Scratch store + tape so the eager entry points share the training path.
struct ScratchAttention {
  ParamStore store;
  explicit ScratchAttention(const MHAttParams& p) {
    p.validate();
    store.create("a.wq", p.wq.rows(), p.wq.cols()) = p.wq;
    store.create("a.bq", p.bq.size(), 1) = p.bq;
    store.create("a.wk", p.wk.rows(), p.wk.cols()) = p.wk;
    store.create("a.bk", p.bk.size(), 1) = p.bk;
    store.create("a.wv", p.wv.rows(), p.wv.cols()) = p.wv;
    store.create("a.bv", p.bv.size(), 1) = p.bv;
    store.create("a.wo", p.wo.rows(), p.wo.cols()) = p.wo;
    store.create("a.bo", p.bo.size(), 1) = p.bo;
  }
};

Mat stack_cols(const std::vector<Vec>& items) {
  if (items.empty()) throw UsageError("mhatt: empty key/value list");
  Mat out(items[0].size(), static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].size() != out.rows())
      throw UsageError("mhatt: inconsistent key/value dimensions");
    out.col(static_cast<Eigen::Index>(i)) = items[i];
  }
  return out;
}

}  // namespace

Vec mhatt(const Vec& query, const std::vector<Vec>& keys,
          const std::vector<Vec>& values, const MHAttParams& params) {
  if (keys.size() != values.size())
    throw UsageError("mhatt: key/value counts disagree");
  ScratchAttention scratch(params);
  ad::Tape tape(&scratch.store);
  ad::Value out = ad::mhatt_node(tape, tape.constant(query),
                                 tape.constant(stack_cols(keys)),
                                 tape.constant(stack_cols(values)), "a",
                                 params.head_count);
  return tape.value(out).col(0);
}

Mat mhatt_weights(const Vec& query, const std::vector<Vec>& keys,
                  const MHAttParams& params) {
  params.validate();
  const Eigen::Index d = params.wq.rows();
  const Eigen::Index dh = d / params.head_count;
  const Mat kmat = stack_cols(keys);
  const Vec q = params.wq * query + params.bq;
  Mat k = params.wk * kmat;
  k.colwise() += params.bk;

  Mat weights(params.head_count, kmat.cols());
  for (int h = 0; h < params.head_count; ++h) {
    Eigen::RowVectorXd logits =
        q.segment(h * dh, dh).transpose() * k.middleRows(h * dh, dh) /
        std::sqrt(static_cast<double>(dh));
    const double peak = logits.maxCoeff();
    Eigen::RowVectorXd e = (logits.array() - peak).exp();
    weights.row(h) = e / e.sum();
  }
  return weights;
}

PoolingParams PoolingParams::init(int model_dim, SplitMix64& rng) {
  PoolingParams p;
  p.w = Vec(model_dim);
  const double bound = std::sqrt(6.0 / static_cast<double>(model_dim + 1));
  for (int i = 0; i < model_dim; ++i) p.w[i] = bound * rng.next_signed_unit();
  p.b = 0.0;
  return p;
}

Vec attentive_pool(const Mat& token_features, int span_begin, int span_end,
                   const PoolingParams& params) {
  if (span_begin < 0 || span_end > token_features.rows() || span_begin >= span_end)
    throw UsageError("attentive_pool: span out of range");
  if (params.w.size() != token_features.cols())
    throw UsageError("attentive_pool: weight dimension mismatch");
  ParamStore store;
  store.create("p.w", params.w.size(), 1) = params.w;
  store.create("p.b", 1, 1)(0, 0) = params.b;
  ad::Tape tape(&store);
  ad::Value span =
      tape.constant(token_features.middleRows(span_begin, span_end - span_begin));
  ad::Value out = ad::attentive_pool_node(tape, span, "p");
  return tape.value(out).col(0);
}

}  // namespace kval
