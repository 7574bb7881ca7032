#pragma once

#include "kval/candidates.hpp"
#include "kval/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <vector>

namespace kval {

struct TrainConfig {
  double learning_rate_new = 5e-5;      // attention and head parameters
  double learning_rate_encoder = 2e-5;  // a trainable encoder, when plugged in
  int epochs = 1;
  int batch_size = 1;
  std::uint64_t seed = 42;
  double warmup_fraction = 0.1;  // linear warmup over the first steps
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int frozen_prefix_layers = 10;  // trainable-encoder setups only

  void validate() const;
};

struct TrainReport {
  std::vector<double> epoch_losses;      // mean loss per epoch
  std::vector<double> epoch_accuracies;  // mean soft score under the decision rule
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

nlohmann::json to_json(const TrainReport& report);

/// First-order adaptive-moment updates with bias correction and linear
/// warmup. Deterministic for a fixed seed; a non-finite loss aborts with the
/// offending batch id. The final parameters are written to `checkpoint_path`.
TrainReport train(ValidationModel& model,
                  const std::vector<PreparedInstance>& dataset,
                  const AnswerVocabulary& vocab, const TrainConfig& config,
                  const std::filesystem::path& checkpoint_path);

/// Max relative error between the loss gradients and central finite
/// differences, over every parameter tensor. Intended for small dimensions.
double grad_check(const ValidationModel& model, const PreparedInstance& instance,
                  double epsilon);

}  // namespace kval
