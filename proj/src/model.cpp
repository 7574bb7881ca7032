#include "kval/model.hpp"

namespace kval {

namespace {

ad::Value zero_vec(ad::Tape& tape, int dim) {
  return tape.constant(Mat::Zero(dim, 1));
}

}  // namespace

std::string ValidationModel::source_prefix(KnowledgeSource source) {
  return to_string(source);
}

ValidationModel::ValidationModel(ModelConfig config, int vocab_size)
    : config_(std::move(config)), vocab_size_(vocab_size) {
  if (vocab_size_ < 1) throw UsageError("model: empty vocabulary");
  if (config_.model_dim % config_.head_count != 0)
    throw UsageError("model: model_dim must be divisible by head_count");
  if (config_.sources.empty()) throw UsageError("model: no knowledge sources");
  SplitMix64 rng(config_.init_seed);
  const int d = config_.model_dim;
  const int hidden = config_.ffn_hidden_mult * d;
  for (KnowledgeSource source : config_.sources) {
    const std::string p = source_prefix(source);
    params_.create_xavier(p + ".pool.w", d, 1, rng);
    params_.create(p + ".pool.b", 1, 1);
    register_attention_params(params_, p + ".phrase_attn", d, config_.head_count, d, rng);
    register_attention_params(params_, p + ".answer_attn", d, config_.head_count, d, rng);
    register_attention_params(params_, p + ".question_attn", d, config_.head_count, d, rng);
    register_ffn_params(params_, p + ".pred", d, hidden, vocab_size_, rng);
    register_ffn_params(params_, p + ".val", d, hidden, 1, rng);
  }
}

ValidationModel::ValidationModel(ModelConfig config, int vocab_size,
                                 ParamStore params)
    : ValidationModel(std::move(config), vocab_size) {
  // Shape-check the checkpoint against the freshly initialized layout.
  for (const auto& name : params_.names()) {
    if (!params.contains(name))
      throw DataError("checkpoint: missing tensor " + name);
    const Mat& theirs = params.get(name);
    const Mat& ours = params_.get(name);
    if (theirs.rows() != ours.rows() || theirs.cols() != ours.cols())
      throw DataError("checkpoint: tensor " + name + " has shape " +
                      std::to_string(theirs.rows()) + "x" +
                      std::to_string(theirs.cols()) + ", expected " +
                      std::to_string(ours.rows()) + "x" +
                      std::to_string(ours.cols()));
  }
  if (params.size() != params_.size())
    throw DataError("checkpoint: unexpected extra tensors");
  params_ = std::move(params);
}

void ValidationModel::validate_instance(const PreparedInstance& inst) const {
  const int d = config_.model_dim;
  if (inst.token_features.cols() != d && inst.token_features.rows() > 0)
    throw UsageError("instance: token feature dimension mismatch");
  if (inst.token_features.rows() > config_.max_question_tokens)
    throw UsageError("instance: question exceeds the token cap");
  if (inst.joint.size() != d) throw UsageError("instance: joint vector dimension");
  if (inst.phrase_spans.empty())
    throw UsageError("instance: needs at least the target phrase");
  if (inst.candidates.empty()) throw UsageError("instance: no candidates");
  if (inst.candidates.size() != inst.answer_vectors.size() ||
      inst.candidates.size() != inst.candidate_vocab.size() ||
      inst.candidates.size() != inst.candidate_soft.size())
    throw UsageError("instance: candidate arrays not parallel");
  if (inst.vocab_soft.size() != vocab_size_)
    throw UsageError("instance: vocab soft scores not over the vocabulary");
  for (KnowledgeSource source : config_.sources) {
    auto it = inst.features.find(source);
    if (it == inst.features.end())
      throw UsageError("instance: missing features for " + to_string(source));
    if (it->second.phrase_queries.size() != inst.phrase_spans.size())
      throw UsageError("instance: phrase features not parallel to spans");
    if (it->second.answer_queries.size() != inst.candidates.size())
      throw UsageError("instance: answer features not parallel to candidates");
  }
}

ValidationModel::TapeOutputs ValidationModel::build(
    ad::Tape& tape, const PreparedInstance& inst) const {
  validate_instance(inst);
  const int d = config_.model_dim;
  const int n_phrases = static_cast<int>(inst.phrase_spans.size());
  const int n_cands = static_cast<int>(inst.candidates.size());

  ad::Value tokens = tape.constant(inst.token_features);
  ad::Value joint = tape.constant(inst.joint);

  TapeOutputs out;
  for (KnowledgeSource source : config_.sources) {
    const std::string prefix = source_prefix(source);
    const SourceFeatures& feats = inst.features.at(source);

    auto aggregate_queries = [&](const Mat& queries,
                                 ad::Value attn_query,
                                 const std::string& attn_prefix,
                                 bool have_query) -> std::pair<ad::Value, bool> {
      if (queries.cols() == 0) return {zero_vec(tape, d), true};
      if (queries.rows() != d)
        throw UsageError("instance: query feature dimension mismatch");
      ad::Value keys = tape.constant(queries);
      if (config_.mean_pool_phrase || !have_query)
        return {ad::mean_cols(keys), false};
      return {ad::mhatt_node(tape, attn_query, keys, keys, attn_prefix,
                             config_.head_count),
              false};
    };

    // Phrase level: attentive-pooled span features query the per-query
    // knowledge vectors.
    std::vector<ad::Value> phrase_embs;
    std::vector<bool> phrase_empty;
    for (int p = 0; p < n_phrases; ++p) {
      const auto [begin, end] = inst.phrase_spans[static_cast<std::size_t>(p)];
      const bool have_span = begin >= 0 && end > begin &&
                             end <= inst.token_features.rows();
      ad::Value u = zero_vec(tape, d);
      if (have_span && !config_.mean_pool_phrase &&
          feats.phrase_queries[static_cast<std::size_t>(p)].cols() > 0) {
        u = ad::attentive_pool_node(tape, ad::rows(tokens, begin, end - begin),
                                    prefix + ".pool");
      }
      auto [emb, empty] = aggregate_queries(
          feats.phrase_queries[static_cast<std::size_t>(p)], u,
          prefix + ".phrase_attn", have_span);
      phrase_embs.push_back(emb);
      phrase_empty.push_back(empty);
    }

    // Question level: the target's embedding attends over the other phrases.
    ad::Value question_emb = phrase_embs[0];
    if (n_phrases > 1) {
      std::vector<ad::Value> others(phrase_embs.begin() + 1, phrase_embs.end());
      if (config_.mean_pool_question) {
        question_emb = ad::mean_cols(ad::concat_cols(others));
      } else {
        ad::Value keys = others.size() == 1 ? others[0] : ad::concat_cols(others);
        question_emb = ad::mhatt_node(tape, phrase_embs[0], keys, keys,
                                      prefix + ".question_attn",
                                      config_.head_count);
      }
    }

    // Answer level.
    std::vector<ad::Value> answer_embs;
    std::vector<bool> answer_empty;
    for (int a = 0; a < n_cands; ++a) {
      const Mat& queries = feats.answer_queries[static_cast<std::size_t>(a)];
      if (queries.cols() == 0) {
        answer_embs.push_back(zero_vec(tape, d));
        answer_empty.push_back(true);
        continue;
      }
      ad::Value keys = tape.constant(queries);
      if (config_.mean_pool_phrase) {
        answer_embs.push_back(ad::mean_cols(keys));
      } else {
        ad::Value attn_query =
            config_.answer_query == ModelConfig::AnswerAttentionQuery::JointEmbedding
                ? joint
                : tape.constant(inst.answer_vectors[static_cast<std::size_t>(a)]);
        answer_embs.push_back(ad::mhatt_node(tape, attn_query, keys, keys,
                                             prefix + ".answer_attn",
                                             config_.head_count));
      }
      answer_empty.push_back(false);
    }

    // Heads.
    ad::Value prediction = ad::sigmoid(
        ad::ffn_node(tape, ad::add(question_emb, joint), prefix + ".pred"));
    std::vector<std::vector<ad::Value>> validation(
        static_cast<std::size_t>(n_cands),
        std::vector<ad::Value>(static_cast<std::size_t>(n_cands)));
    std::vector<ad::Value> fans;
    for (int a = 0; a < n_cands; ++a)
      fans.push_back(tape.constant(inst.answer_vectors[static_cast<std::size_t>(a)]));
    for (int a = 0; a < n_cands; ++a)
      for (int other = 0; other < n_cands; ++other)
        validation[static_cast<std::size_t>(a)][static_cast<std::size_t>(other)] =
            ad::sigmoid(ad::ffn_node(
                tape,
                ad::mul(fans[static_cast<std::size_t>(a)],
                        answer_embs[static_cast<std::size_t>(other)]),
                prefix + ".val"));

    out.phrase_embs[source] = std::move(phrase_embs);
    out.phrase_empty[source] = std::move(phrase_empty);
    out.question_emb.emplace(source, question_emb);
    out.answer_embs[source] = std::move(answer_embs);
    out.answer_empty[source] = std::move(answer_empty);
    out.predictions.emplace(source, prediction);
    out.validations[source] = std::move(validation);
  }
  return out;
}

ModelOutputs ValidationModel::forward(const PreparedInstance& inst) const {
  // Forward never calls backward, so the store is left untouched.
  ad::Tape tape(const_cast<ParamStore*>(&params_));
  TapeOutputs nodes = build(tape, inst);

  ModelOutputs out;
  const int n_cands = static_cast<int>(inst.candidates.size());
  for (KnowledgeSource source : config_.sources) {
    SourceEmbeddings emb;
    for (const auto& v : nodes.phrase_embs[source])
      emb.phrase_embs.push_back(tape.value(v).col(0));
    emb.phrase_empty = nodes.phrase_empty[source];
    emb.question_emb = tape.value(nodes.question_emb.at(source)).col(0);
    for (const auto& v : nodes.answer_embs[source])
      emb.answer_embs.push_back(tape.value(v).col(0));
    emb.answer_empty = nodes.answer_empty[source];
    out.embeddings[source] = std::move(emb);

    out.source_predictions[source] = tape.value(nodes.predictions.at(source)).col(0);
    Mat j(n_cands, n_cands);
    for (int a = 0; a < n_cands; ++a)
      for (int other = 0; other < n_cands; ++other)
        j(a, other) = tape.scalar_value(
            nodes.validations[source][static_cast<std::size_t>(a)]
                             [static_cast<std::size_t>(other)]);
    out.source_validations[source] = std::move(j);
  }

  std::vector<Vec> preds;
  for (KnowledgeSource source : config_.sources)
    preds.push_back(out.source_predictions.at(source));
  out.fused_prediction = fuse_predictions(preds);

  Mat fused = out.source_validations.at(config_.sources[0]);
  for (std::size_t k = 1; k < config_.sources.size(); ++k)
    fused = fused.cwiseMax(out.source_validations.at(config_.sources[k]));
  out.fused_validation = std::move(fused);
  return out;
}

ad::Value ValidationModel::loss_node(ad::Tape& tape,
                                     const PreparedInstance& inst) const {
  TapeOutputs nodes = build(tape, inst);
  const int n_cands = static_cast<int>(inst.candidates.size());

  // Fused validation scores: max over sources per (a, a').
  std::vector<std::vector<ad::Value>> fused(
      static_cast<std::size_t>(n_cands),
      std::vector<ad::Value>(static_cast<std::size_t>(n_cands)));
  for (int a = 0; a < n_cands; ++a)
    for (int other = 0; other < n_cands; ++other) {
      std::vector<ad::Value> per_source;
      for (KnowledgeSource source : config_.sources)
        per_source.push_back(nodes.validations[source][static_cast<std::size_t>(a)]
                                               [static_cast<std::size_t>(other)]);
      fused[static_cast<std::size_t>(a)][static_cast<std::size_t>(other)] =
          per_source.size() == 1 ? per_source[0] : ad::max_of(per_source);
    }

  std::vector<ad::Value> terms;
  const Mat zero_target = Mat::Zero(1, 1);
  for (int t = 0; t < n_cands; ++t) {
    if (n_cands > 1) {
      std::vector<ad::Value> col_off, row_off;
      for (int other = 0; other < n_cands; ++other) {
        if (other == t) continue;
        col_off.push_back(fused[static_cast<std::size_t>(other)][static_cast<std::size_t>(t)]);
        row_off.push_back(fused[static_cast<std::size_t>(t)][static_cast<std::size_t>(other)]);
      }
      terms.push_back(ad::bce(col_off.size() == 1 ? col_off[0] : ad::max_of(col_off),
                              zero_target));
      terms.push_back(ad::bce(row_off.size() == 1 ? row_off[0] : ad::max_of(row_off),
                              zero_target));
    }
    terms.push_back(ad::bce(fused[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)],
                            Mat::Constant(1, 1, inst.candidate_soft[static_cast<std::size_t>(t)])));
  }

  // Auxiliary standard prediction losses for each source.
  if (config_.aux_vqa_weight > 0.0) {
    for (KnowledgeSource source : config_.sources) {
      ad::Value aux = ad::mean(ad::bce(nodes.predictions.at(source), inst.vocab_soft));
      terms.push_back(ad::scale(aux, config_.aux_vqa_weight));
    }
  }

  ad::Value total = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

double ValidationModel::loss(const PreparedInstance& inst) const {
  ad::Tape tape(const_cast<ParamStore*>(&params_));
  return tape.scalar_value(loss_node(tape, inst));
}

}  // namespace kval
