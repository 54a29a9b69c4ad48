#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "budgetface/checkpoint.hpp"
#include "budgetface/config.hpp"
#include "budgetface/synthetic.hpp"

namespace budgetface {

struct MetricsRow {
  std::int64_t iter = 0;  // iterations completed
  double lr = 0.0;        // learning rate of the last step in the interval
  double loss = 0.0;      // mean training loss over the interval
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricsRow> log;
  std::vector<double> epoch_losses;  // mean minibatch loss of every complete pass, main phase
  // Inference-mode loss on the whole training set after each complete pass.
  std::vector<double> epoch_eval_losses;
};

// SGD with momentum on the margin loss, driven by the warmup + cosine
// schedule, followed by the optional anchor-finetune phase, the optional
// AdaBN pass over the held-out inputs and the quality-head fit.
// `max_iters` truncates the main phase; with 0 the returned checkpoint is
// the initialization. Throws kDivergedLoss on a non-finite loss.
TrainResult train(const ExperimentConfig& cfg, LossKind kind, const IdentityData& data,
                  std::optional<std::int64_t> max_iters = std::nullopt);
TrainResult train(const ExperimentConfig& cfg, LossKind kind);

// Model initialization used by train(), exposed for tests.
ModelParams initial_params(const ExperimentConfig& cfg, std::size_t num_classes);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& log);

}  // namespace budgetface
