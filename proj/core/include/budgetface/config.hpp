#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "budgetface/margin_loss.hpp"
#include "budgetface/quality.hpp"
#include "budgetface/synthetic.hpp"
#include "budgetface/training.hpp"

namespace budgetface {

struct TrainOptions {
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  double dropout = 0.4;
  double stochastic_depth_keep = 1.0;
  bool adabn = false;
  bool anchor_finetune = false;
  std::int64_t finetune_iters = 300;
  double finetune_lr = 0.01;
  bool freeze_anchors = false;  // after anchor finetuning
  std::size_t log_interval = 50;
  double quality_ridge = 1e-3;
};

// Experiment file: INI-style sections [data] [loss] [schedule] [aggregation]
// [eval] [output]. Every key is optional; unknown keys are rejected.
struct ExperimentConfig {
  SyntheticSpec data;
  std::vector<LossKind> losses{LossKind::kArcFace, LossKind::kArcNegFace};
  MarginConfig margin{LossKind::kArcFace, 16.0, 0.5};  // kind is taken from `losses`
  bool label_smooth = false;
  double label_smooth_eps = 0.1;
  Schedule schedule{0.001, 0.002, 300, 3000, 0.0};
  TrainOptions train;
  std::vector<AggregationPolicy> policies{AggregationPolicy::kAvg, AggregationPolicy::kWeightedSum,
                                          AggregationPolicy::kTop1, AggregationPolicy::kQanPlusPlus};
  std::vector<double> fpr_targets{1e-2};
  std::string output_dir = "out";

  // Margin settings for one training run.
  MarginConfig margin_for(LossKind kind) const;
  // Throws kInvalidConfig / kInvalidSpec.
  void validate() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Canonical text form: every key, fixed order, %.17g numbers. parse_config
// of this text reproduces the config.
std::string config_to_string(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace budgetface
