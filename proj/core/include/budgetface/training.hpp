#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "budgetface/numeric.hpp"
#include "budgetface/rng.hpp"

namespace budgetface {

// Linear warmup from base_lr to peak_lr, then cosine decay to lr_floor at
// total_iters.
struct Schedule {
  double base_lr = 0.001;
  double peak_lr = 0.4;
  std::int64_t warmup_iters = 10000;
  std::int64_t total_iters = 100000;
  double lr_floor = 0.0;

  void validate() const;
};

// Throws kOutOfRange unless 0 <= iter <= total_iters.
double lr_at(std::int64_t iter, const Schedule& sched);

// Stochastic-depth keep flags. In training mode a dropped block contributes
// nothing and a kept block contributes its full branch; in inference mode
// every block runs with its branch scaled by keep_rate.
struct DepthMask {
  std::vector<bool> keep;
  double keep_rate = 1.0;
  bool inference = false;

  double branch_scale(std::size_t block) const;
  std::size_t kept_count() const;
};

DepthMask sample_depth_mask(std::size_t num_blocks, double keep_rate, SeededRng& rng);
DepthMask inference_depth_mask(std::size_t num_blocks, double keep_rate);

struct AnchorFinetuneResult {
  AnchorSet anchors;
  // Classes whose feature mean vanished; they keep their previous anchor.
  std::vector<std::size_t> degenerate_classes;
};

// Re-initializes each anchor that has samples as the normalized mean of its
// features. `labels` are row indices into `anchors`.
AnchorFinetuneResult anchor_finetune(const Matrix& unit_feats, std::span<const std::size_t> labels,
                                     const AnchorSet& anchors);
AnchorFinetuneResult anchor_finetune(std::span<const Embedding> feats, std::span<const std::size_t> labels,
                                     const AnchorSet& anchors);

struct BnStats {
  std::vector<double> mean;
  std::vector<double> var;
  double epsilon = 1e-5;

  std::size_t channels() const noexcept { return mean.size(); }
  void validate() const;
};

// Exact two-pass per-channel mean and population variance over every row of
// every batch. Epsilon is carried over from `old`; affine parameters live
// elsewhere and are never touched.
BnStats adabn_recalibrate(std::span<const Matrix> batches, const BnStats& old);

// (x - mean) / sqrt(var + epsilon), per channel.
Matrix bn_normalize(const Matrix& x, const BnStats& stats);

// Streaming per-channel moments with Chan's pairwise combiner, for computing
// partial statistics on separate shards and merging them in a fixed order.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t channels);

  void add(const Matrix& batch);
  void merge(const MomentAccumulator& other);

  std::size_t count() const noexcept { return count_; }
  BnStats stats(double epsilon) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace budgetface
