#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "budgetface/config.hpp"
#include "budgetface/quality.hpp"
#include "budgetface/trainer.hpp"

namespace budgetface {

struct ReportRow {
  std::string loss;
  std::string policy;  // "image" for single-image verification
  double fpr_target = 0.0;
  double threshold = 0.0;
  double tpr = 0.0;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<TrainResult> runs;      // one per configured loss
  std::vector<std::string> warnings;  // e.g. too few impostor pairs for a target
};

// Unit embeddings of `inputs` under inference-mode parameters.
Matrix embed(const ModelParams& p, const Matrix& inputs, double branch_scale);

// Frame embeddings of each video, with qualities from the learned head.
std::vector<FrameSet> build_framesets(const ModelParams& p, const std::vector<VideoSet>& videos,
                                      double branch_scale);

// Trains every configured loss, then evaluates TPR at each FPR target on all
// pairs of held-out images and on aggregated video templates per policy.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Header loss,policy,fpr_target,threshold,tpr.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace budgetface
