#include "budgetface/experiment.hpp"

#include <ostream>

#include "budgetface/eval.hpp"
#include "csv_util.hpp"

namespace budgetface {

Matrix embed(const ModelParams& p, const Matrix& inputs, double branch_scale) {
  return infer(p, inputs, branch_scale).embeddings;
}

std::vector<FrameSet> build_framesets(const ModelParams& p, const std::vector<VideoSet>& videos,
                                      double branch_scale) {
  std::vector<FrameSet> sets;
  sets.reserve(videos.size());
  for (const auto& v : videos) {
    const InferenceOutputs out = infer(p, v.inputs, branch_scale);
    FrameSet s;
    s.set_id = v.set_id;
    s.frames.reserve(out.embeddings.rows());
    for (std::size_t r = 0; r < out.embeddings.rows(); ++r) s.frames.push_back(normalize(out.embeddings.row(r)));
    s.qualities = predict_quality(p, out.hidden);
    sets.push_back(std::move(s));
  }
  return sets;
}

namespace {

void score_rows(const ScoreSet& scores, const std::string& loss, const std::string& policy,
                const std::vector<double>& targets, ExperimentResult& result) {
  for (double fpr : targets) {
    if (scores.impostor.size() < min_impostors_for(fpr))
      result.warnings.push_back(loss + "/" + policy + ": " + std::to_string(scores.impostor.size()) +
                                " impostor pairs cannot resolve FPR " + detail::format_double(fpr));
    const TprAtFpr r = tpr_at_fpr(scores, fpr);
    result.rows.push_back({loss, policy, fpr, r.threshold, r.tpr});
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const IdentityData data = gen_identities(cfg.data);
  const std::vector<VideoSet> videos = gen_framesets(cfg.data);
  const std::vector<std::string> image_labels = data.test.sample_names();
  std::vector<std::string> video_labels;
  video_labels.reserve(videos.size());
  for (const auto& v : videos) video_labels.push_back(v.identity);

  ExperimentResult result;
  const double keep = cfg.train.stochastic_depth_keep;
  for (LossKind kind : cfg.losses) {
    TrainResult run = train(cfg, kind, data);
    const ModelParams& p = run.checkpoint.params;
    const std::string loss(to_string(kind));

    score_rows(verification_pairs(embed(p, data.test.inputs, keep), image_labels, Pairing::all()), loss, "image",
               cfg.fpr_targets, result);

    const std::vector<FrameSet> sets = build_framesets(p, videos, keep);
    for (AggregationPolicy policy : cfg.policies) {
      std::vector<Embedding> templates;
      templates.reserve(sets.size());
      for (const auto& s : sets) templates.push_back(aggregate(s, policy));
      score_rows(verification_pairs(templates, video_labels, Pairing::all()), loss, std::string(to_string(policy)),
                 cfg.fpr_targets, result);
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "loss,policy,fpr_target,threshold,tpr\n";
  for (const auto& r : rows)
    out << r.loss << ',' << r.policy << ',' << detail::format_double(r.fpr_target) << ','
        << detail::format_double(r.threshold) << ',' << detail::format_double(r.tpr) << '\n';
}

}  // namespace budgetface
