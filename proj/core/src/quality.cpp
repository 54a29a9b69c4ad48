#include "budgetface/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "budgetface/error.hpp"

namespace budgetface {
namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void require_qualities(const FrameSet& set) {
  require(set.qualities.has_value(), ErrorCode::kMissingQualities,
          "set '" + set.set_id + "' has no per-frame qualities");
  require(set.qualities->size() == set.frames.size(), ErrorCode::kDimensionMismatch,
          "set '" + set.set_id + "' has mismatched quality count");
  for (double q : *set.qualities)
    require(std::isfinite(q), ErrorCode::kNonFiniteInput, "non-finite quality in set '" + set.set_id + "'");
}

}  // namespace

double quality_raw(std::span<const double> unit_feat, const AnchorSet& anchors, std::size_t true_class) {
  require(anchors.num_classes() >= 2, ErrorCode::kSingleClass, "quality needs at least two classes");
  require(true_class < anchors.num_classes(), ErrorCode::kInvalidClass, "class index out of range");
  require(unit_feat.size() == anchors.dim(), ErrorCode::kDimensionMismatch,
          "feature dimension differs from anchors");
  const double own = cosine(unit_feat, anchors.anchor(true_class));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < anchors.num_classes(); ++j)
    if (j != true_class) best = std::max(best, cosine(unit_feat, anchors.anchor(j)));
  const double ratio = own / std::max(best, kQualityDenominatorFloor);
  return std::clamp(ratio, -kQualityClip, kQualityClip);
}

double quality_raw(const Embedding& feat, const AnchorSet& anchors, std::size_t true_class) {
  return quality_raw(feat.values(), anchors, true_class);
}

NormalizedQualities quality_normalize(std::span<const double> raw) {
  require(raw.size() >= 2, ErrorCode::kDegenerateDistribution, "need at least two quality values");
  double mean = 0.0;
  for (double q : raw) {
    require(std::isfinite(q), ErrorCode::kNonFiniteInput, "non-finite raw quality");
    mean += q;
  }
  mean /= static_cast<double>(raw.size());
  double var = 0.0;
  for (double q : raw) var += (q - mean) * (q - mean);
  var /= static_cast<double>(raw.size());
  const double std_dev = std::sqrt(var);
  require(std_dev > 0.0, ErrorCode::kDegenerateDistribution, "raw qualities are constant");

  NormalizedQualities out{{}, {mean, std_dev}};
  out.values.reserve(raw.size());
  for (double q : raw) out.values.push_back(apply_quality_stats(q, out.stats));
  return out;
}

double apply_quality_stats(double raw, const QualityStats& stats) {
  return sigmoid((raw - stats.mean) / stats.std);
}

std::vector<double> quality_rescale(std::span<const double> q) {
  require(q.size() >= 3, ErrorCode::kTooFewFrames, "rescaling needs at least three frames");
  const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
  require(*hi > *lo, ErrorCode::kAllEqual, "all qualities equal");
  const double k = 1.0 / (*hi - *lo);
  const double b = 1.0 - k * *hi;
  std::vector<double> w;
  w.reserve(q.size());
  for (double x : q) w.push_back(k * x + b);
  // K*max + B is 1 by construction; K*min + B can land at +-1ulp.
  w[static_cast<std::size_t>(lo - q.begin())] = 0.0;
  w[static_cast<std::size_t>(hi - q.begin())] = 1.0;
  for (double& x : w) x = std::clamp(x, 0.0, 1.0);
  return w;
}

std::string_view to_string(AggregationPolicy policy) {
  switch (policy) {
    case AggregationPolicy::kAvg: return "avg";
    case AggregationPolicy::kWeightedSum: return "weighted_sum";
    case AggregationPolicy::kTop1: return "top1";
    case AggregationPolicy::kQanPlusPlus: return "qan_pp";
  }
  return "unknown";
}

AggregationPolicy parse_policy(std::string_view name) {
  if (name == "avg") return AggregationPolicy::kAvg;
  if (name == "weighted_sum") return AggregationPolicy::kWeightedSum;
  if (name == "top1") return AggregationPolicy::kTop1;
  if (name == "qan_pp") return AggregationPolicy::kQanPlusPlus;
  fail(ErrorCode::kInvalidConfig, "unknown aggregation policy '" + std::string(name) + "'");
}

std::vector<double> aggregation_weights(const FrameSet& set, AggregationPolicy policy) {
  const std::size_t n = set.frames.size();
  require(n >= 1, ErrorCode::kEmptySet, "set '" + set.set_id + "' has no frames");
  if (policy == AggregationPolicy::kAvg) return std::vector<double>(n, 1.0);

  require_qualities(set);
  const auto& q = *set.qualities;
  switch (policy) {
    case AggregationPolicy::kWeightedSum:
      for (double x : q)
        require(x >= 0.0, ErrorCode::kInvalidSpec, "weighted_sum needs nonnegative qualities");
      // Equal qualities weigh like avg, bit for bit.
      if (q.front() > 0.0 && std::all_of(q.begin(), q.end(), [&](double x) { return x == q.front(); }))
        return std::vector<double>(n, 1.0);
      return q;
    case AggregationPolicy::kTop1: {
      // First frame wins ties.
      std::vector<double> w(n, 0.0);
      w[static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin())] = 1.0;
      return w;
    }
    case AggregationPolicy::kQanPlusPlus: {
      if (n < 3) return aggregation_weights(set, AggregationPolicy::kWeightedSum);
      const auto [lo, hi] = std::minmax_element(q.begin(), q.end());
      if (*lo == *hi) return std::vector<double>(n, 1.0);
      return quality_rescale(q);
    }
    case AggregationPolicy::kAvg: break;
  }
  return std::vector<double>(n, 1.0);
}

std::vector<double> weighted_mean(std::span<const Embedding> frames, std::span<const double> weights) {
  require(!frames.empty(), ErrorCode::kEmptySet, "no frames to aggregate");
  require(frames.size() == weights.size(), ErrorCode::kDimensionMismatch, "weight count differs from frames");
  const std::size_t d = frames.front().dim();
  std::vector<double> acc(d, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require(frames[i].dim() == d, ErrorCode::kDimensionMismatch, "frames differ in dimension");
    const double w = weights[i];
    total += w;
    if (w == 0.0) continue;
    const auto f = frames[i].values();
    for (std::size_t k = 0; k < d; ++k) acc[k] += w * f[k];
  }
  require(total > 0.0, ErrorCode::kDegenerateDistribution, "aggregation weights sum to zero");
  for (double& x : acc) x /= total;
  return acc;
}

Embedding aggregate(const FrameSet& set, AggregationPolicy policy) {
  const auto w = aggregation_weights(set, policy);
  if (set.frames.size() == 1) return set.frames.front();
  return normalize(weighted_mean(set.frames, w));
}

NormalizedQualities quality_regression_targets(const Matrix& unit_feats, const AnchorSet& anchors,
                                               std::span<const std::size_t> labels) {
  require(anchors.num_classes() >= 2, ErrorCode::kSingleClass, "quality needs at least two classes");
  require(labels.size() == unit_feats.rows(), ErrorCode::kDimensionMismatch, "label count differs from features");
  std::vector<double> raw;
  raw.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) raw.push_back(quality_raw(unit_feats.row(i), anchors, labels[i]));
  return quality_normalize(raw);
}

double quality_l2_loss(std::span<const double> predicted, std::span<const double> target) {
  require(predicted.size() == target.size() && !predicted.empty(), ErrorCode::kDimensionMismatch,
          "prediction/target length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) acc += (predicted[i] - target[i]) * (predicted[i] - target[i]);
  return acc / static_cast<double>(predicted.size());
}

}  // namespace budgetface
