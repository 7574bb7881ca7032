#include "kval/training.hpp"

#include <chrono>
#include <cmath>

namespace kval {

using nlohmann::json;

void TrainConfig::validate() const {
  if (learning_rate_new <= 0.0 || learning_rate_encoder <= 0.0)
    throw ConfigError("train: learning rates must be positive");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
    throw ConfigError("train: warmup_fraction must lie in [0, 1]");
}

json to_json(const TrainReport& report) {
  return json{{"epoch_losses", report.epoch_losses},
              {"epoch_accuracies", report.epoch_accuracies},
              {"wall_seconds", report.wall_seconds},
              {"checkpoint_path", report.checkpoint_path}};
}

namespace {

struct AdamState {
  std::map<std::string, Mat> m;
  std::map<std::string, Mat> v;
  long step = 0;
};

void adam_update(ParamStore& params, AdamState& state, const TrainConfig& cfg,
                 double lr) {
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (const auto& name : params.names()) {
    const Mat& g = params.grad(name);
    Mat& m = state.m[name];
    Mat& v = state.v[name];
    if (m.size() == 0) {
      m = Mat::Zero(g.rows(), g.cols());
      v = Mat::Zero(g.rows(), g.cols());
    }
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const Mat m_hat = m / correction1;
    const Mat v_hat = v / correction2;
    params.get(name) -=
        lr * (m_hat.array() / (v_hat.array().sqrt() + cfg.adam_eps)).matrix();
  }
}

double dataset_accuracy(const ValidationModel& model,
                        const std::vector<PreparedInstance>& dataset,
                        const AnswerVocabulary& vocab) {
  if (dataset.empty()) return 0.0;
  double total = 0.0;
  for (const PreparedInstance& inst : dataset) {
    ModelOutputs outs = model.forward(inst);
    DecisionRecord record =
        consistency_decision(outs.fused_prediction, outs.fused_validation,
                             inst.candidates, vocab);
    const int idx = vocab.index_of(record.final_answer);
    if (idx >= 0) total += inst.vocab_soft[idx];
  }
  return total / static_cast<double>(dataset.size());
}

}  // namespace

TrainReport train(ValidationModel& model,
                  const std::vector<PreparedInstance>& dataset,
                  const AnswerVocabulary& vocab, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_path) {
  config.validate();
  if (dataset.empty()) throw UsageError("train: empty dataset");
  const auto started = std::chrono::steady_clock::now();

  const int n = static_cast<int>(dataset.size());
  const int batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long total_steps = static_cast<long>(batches_per_epoch) * config.epochs;
  const long warmup_steps = std::max<long>(
      1, static_cast<long>(std::ceil(config.warmup_fraction *
                                     static_cast<double>(total_steps))));

  AdamState adam;
  SplitMix64 shuffle_rng(config.seed);
  TrainReport report;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.next() %
                                     static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    double epoch_loss = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      model.params().zero_grads();
      ad::Tape tape(&model.params());
      std::vector<ad::Value> losses;
      const int begin = b * config.batch_size;
      const int end = std::min(n, begin + config.batch_size);
      for (int i = begin; i < end; ++i)
        losses.push_back(model.loss_node(
            tape, dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]));
      ad::Value batch_loss = losses[0];
      for (std::size_t i = 1; i < losses.size(); ++i)
        batch_loss = ad::add(batch_loss, losses[i]);
      batch_loss = ad::scale(batch_loss, 1.0 / static_cast<double>(losses.size()));

      const double loss_value = tape.scalar_value(batch_loss);
      if (!std::isfinite(loss_value))
        throw DataError("train: non-finite loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(b));
      tape.backward(batch_loss);

      const double warmup =
          std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(warmup_steps));
      adam_update(model.params(), adam, config, config.learning_rate_new * warmup);
      ++step;
      epoch_loss += loss_value;
    }
    report.epoch_losses.push_back(epoch_loss / batches_per_epoch);
    report.epoch_accuracies.push_back(dataset_accuracy(model, dataset, vocab));
  }

  model.params().save(checkpoint_path);
  report.checkpoint_path = checkpoint_path.string();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return report;
}

double grad_check(const ValidationModel& model, const PreparedInstance& instance,
                  double epsilon) {
  if (epsilon <= 0.0) throw UsageError("grad_check: epsilon must be positive");
  // The store is restored to its starting values before returning.
  ParamStore& params = const_cast<ParamStore&>(model.params());
  params.zero_grads();
  std::map<std::string, Mat> analytic;
  {
    ad::Tape tape(&params);
    tape.backward(model.loss_node(tape, instance));
    for (const auto& name : params.names()) analytic[name] = params.grad(name);
  }

  double worst = 0.0;
  for (const auto& name : params.names()) {
    Mat& theta = params.get(name);
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      for (Eigen::Index i = 0; i < theta.rows(); ++i) {
        const double saved = theta(i, j);
        theta(i, j) = saved + epsilon;
        const double up = model.loss(instance);
        theta(i, j) = saved - epsilon;
        const double down = model.loss(instance);
        theta(i, j) = saved;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[name](i, j);
        const double rel =
            std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

}  // namespace kval
