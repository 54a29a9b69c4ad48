#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "budgetface/numeric.hpp"

namespace budgetface {

// Floor on the best-impostor cosine and clip range for the raw quality ratio.
inline constexpr double kQualityDenominatorFloor = 1e-3;
inline constexpr double kQualityClip = 50.0;

struct QualityStats {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation, > 0
};

// cos(F, W_c) / max_{j != c} cos(F, W_j), denominator floored at 1e-3 and
// the ratio clipped to [-50, 50].
double quality_raw(std::span<const double> unit_feat, const AnchorSet& anchors, std::size_t true_class);
double quality_raw(const Embedding& feat, const AnchorSet& anchors, std::size_t true_class);

struct NormalizedQualities {
  std::vector<double> values;
  QualityStats stats;
};

// sigmoid((q - mean) / std) over the whole list. Throws
// kDegenerateDistribution for fewer than two or constant values.
NormalizedQualities quality_normalize(std::span<const double> raw);
double apply_quality_stats(double raw, const QualityStats& stats);

// Per-set affine rescale w = K q + B, K = 1 / (max - min), B = 1 - K max.
// Throws kTooFewFrames when n < 3 and kAllEqual when max == min.
std::vector<double> quality_rescale(std::span<const double> q);

enum class AggregationPolicy { kAvg, kWeightedSum, kTop1, kQanPlusPlus };

std::string_view to_string(AggregationPolicy policy);
AggregationPolicy parse_policy(std::string_view name);

struct FrameSet {
  std::string set_id;
  std::vector<Embedding> frames;
  std::optional<std::vector<double>> qualities;  // normalized, one per frame
};

// Nonnegative per-frame weights a policy assigns (not normalized to sum 1).
// qan_pp: rescaled qualities for n >= 3 (uniform when all equal), the
// normalized qualities themselves for n < 3.
std::vector<double> aggregation_weights(const FrameSet& set, AggregationPolicy policy);

// sum_i w_i F_i / sum_i w_i, before renormalization.
std::vector<double> weighted_mean(std::span<const Embedding> frames, std::span<const double> weights);

// Unit-length set representation.
Embedding aggregate(const FrameSet& set, AggregationPolicy policy);

// Raw quality of every training feature under the trained anchors, then
// normalized across the set. The values are the regression targets.
NormalizedQualities quality_regression_targets(const Matrix& unit_feats, const AnchorSet& anchors,
                                               std::span<const std::size_t> labels);

// Mean squared error used to fit the quality regressor.
double quality_l2_loss(std::span<const double> predicted, std::span<const double> target);

}  // namespace budgetface
