#include "budgetface/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>

#include "budgetface/error.hpp"

namespace budgetface {

void Schedule::validate() const {
  require(std::isfinite(base_lr) && std::isfinite(peak_lr) && std::isfinite(lr_floor), ErrorCode::kInvalidConfig,
          "schedule has non-finite learning rates");
  require(base_lr > 0.0 && peak_lr > 0.0, ErrorCode::kInvalidConfig, "learning rates must be positive");
  require(base_lr <= peak_lr, ErrorCode::kInvalidConfig, "base_lr must not exceed peak_lr");
  require(lr_floor >= 0.0 && lr_floor <= peak_lr, ErrorCode::kInvalidConfig, "lr_floor must lie in [0, peak_lr]");
  require(warmup_iters > 0 && total_iters > 0, ErrorCode::kInvalidConfig, "iteration counts must be positive");
  require(warmup_iters < total_iters, ErrorCode::kInvalidConfig, "warmup_iters must be below total_iters");
}

double lr_at(std::int64_t iter, const Schedule& sched) {
  sched.validate();
  require(iter >= 0 && iter <= sched.total_iters, ErrorCode::kOutOfRange,
          "iteration " + std::to_string(iter) + " outside [0, " + std::to_string(sched.total_iters) + "]");
  if (iter < sched.warmup_iters) {
    const double frac = static_cast<double>(iter) / static_cast<double>(sched.warmup_iters);
    return std::lerp(sched.base_lr, sched.peak_lr, frac);
  }
  const double progress = static_cast<double>(iter - sched.warmup_iters) /
                          static_cast<double>(sched.total_iters - sched.warmup_iters);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return sched.lr_floor + (sched.peak_lr - sched.lr_floor) * cosine;
}

double DepthMask::branch_scale(std::size_t block) const {
  if (inference) return keep_rate;
  return keep.at(block) ? 1.0 : 0.0;
}

std::size_t DepthMask::kept_count() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
}

DepthMask sample_depth_mask(std::size_t num_blocks, double keep_rate, SeededRng& rng) {
  require(keep_rate > 0.0 && keep_rate <= 1.0, ErrorCode::kInvalidRate, "keep rate must lie in (0, 1]");
  DepthMask mask{std::vector<bool>(num_blocks, true), keep_rate, false};
  for (std::size_t b = 0; b < num_blocks; ++b) mask.keep[b] = rng.bernoulli(keep_rate);
  return mask;
}

DepthMask inference_depth_mask(std::size_t num_blocks, double keep_rate) {
  require(keep_rate > 0.0 && keep_rate <= 1.0, ErrorCode::kInvalidRate, "keep rate must lie in (0, 1]");
  return DepthMask{std::vector<bool>(num_blocks, true), keep_rate, true};
}

AnchorFinetuneResult anchor_finetune(const Matrix& unit_feats, std::span<const std::size_t> labels,
                                     const AnchorSet& anchors) {
  require(labels.size() == unit_feats.rows(), ErrorCode::kDimensionMismatch, "label count differs from features");
  require(unit_feats.rows() == 0 || unit_feats.cols() == anchors.dim(), ErrorCode::kDimensionMismatch,
          "feature dimension differs from anchors");
  const std::size_t classes = anchors.num_classes();
  Matrix sums(classes, anchors.dim());
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes, ErrorCode::kInvalidClass, "label out of range");
    auto s = sums.row(labels[i]);
    const auto f = unit_feats.row(i);
    for (std::size_t k = 0; k < f.size(); ++k) s[k] += f[k];
    ++counts[labels[i]];
  }

  Matrix updated = anchors.matrix();
  AnchorFinetuneResult result{anchors, {}};
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] == 0) continue;
    auto s = sums.row(c);
    for (double& x : s) x /= static_cast<double>(counts[c]);
    if (l2_norm(s) < kMinNorm) {
      std::clog << "warning: anchor finetune: mean feature of class '" << anchors.class_ids()[c]
                << "' vanishes; keeping previous anchor\n";
      result.degenerate_classes.push_back(c);
      continue;
    }
    const Embedding e = normalize(s);
    std::copy(e.values().begin(), e.values().end(), updated.row(c).begin());
  }
  result.anchors = AnchorSet(std::move(updated), anchors.class_ids());
  return result;
}

AnchorFinetuneResult anchor_finetune(std::span<const Embedding> feats, std::span<const std::size_t> labels,
                                     const AnchorSet& anchors) {
  if (feats.empty()) return anchor_finetune(Matrix(0, anchors.dim()), labels, anchors);
  return anchor_finetune(stack(feats), labels, anchors);
}

void BnStats::validate() const {
  require(mean.size() == var.size(), ErrorCode::kDimensionMismatch, "BN mean/variance sizes differ");
  require(epsilon >= 0.0 && std::isfinite(epsilon), ErrorCode::kInvalidConfig, "BN epsilon must be >= 0");
  for (double v : var) require(v >= 0.0, ErrorCode::kInvalidConfig, "negative BN variance");
}

BnStats adabn_recalibrate(std::span<const Matrix> batches, const BnStats& old) {
  old.validate();
  std::size_t count = 0;
  for (const auto& b : batches) count += b.rows();
  require(!batches.empty() && count > 0, ErrorCode::kEmptyStream, "AdaBN needs at least one non-empty batch");
  const std::size_t ch = old.channels();
  for (const auto& b : batches)
    require(b.rows() == 0 || b.cols() == ch, ErrorCode::kDimensionMismatch, "batch channel count differs from BN stats");

  BnStats out{std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0), old.epsilon};
  for (const auto& b : batches)
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t k = 0; k < ch; ++k) out.mean[k] += b(r, k);
  for (double& m : out.mean) m /= static_cast<double>(count);
  for (const auto& b : batches)
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t k = 0; k < ch; ++k) {
        const double d = b(r, k) - out.mean[k];
        out.var[k] += d * d;
      }
  for (double& v : out.var) v /= static_cast<double>(count);
  return out;
}

Matrix bn_normalize(const Matrix& x, const BnStats& stats) {
  require(x.cols() == stats.channels(), ErrorCode::kDimensionMismatch, "channel count differs from BN stats");
  Matrix out(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.cols(); ++k) {
    const double inv = 1.0 / std::sqrt(stats.var[k] + stats.epsilon);
    for (std::size_t r = 0; r < x.rows(); ++r) out(r, k) = (x(r, k) - stats.mean[k]) * inv;
  }
  return out;
}

MomentAccumulator::MomentAccumulator(std::size_t channels) : mean_(channels, 0.0), m2_(channels, 0.0) {}

void MomentAccumulator::add(const Matrix& batch) {
  if (batch.rows() == 0) return;
  require(batch.cols() == mean_.size(), ErrorCode::kDimensionMismatch, "batch channel count mismatch");
  MomentAccumulator part(mean_.size());
  part.count_ = batch.rows();
  for (std::size_t r = 0; r < batch.rows(); ++r)
    for (std::size_t k = 0; k < mean_.size(); ++k) part.mean_[k] += batch(r, k);
  for (double& m : part.mean_) m /= static_cast<double>(part.count_);
  for (std::size_t r = 0; r < batch.rows(); ++r)
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      const double d = batch(r, k) - part.mean_[k];
      part.m2_[k] += d * d;
    }
  merge(part);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  require(other.mean_.size() == mean_.size(), ErrorCode::kDimensionMismatch, "accumulator channel mismatch");
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  for (std::size_t k = 0; k < mean_.size(); ++k) {
    const double delta = other.mean_[k] - mean_[k];
    mean_[k] += delta * nb / n;
    m2_[k] += other.m2_[k] + delta * delta * na * nb / n;
  }
  count_ += other.count_;
}

BnStats MomentAccumulator::stats(double epsilon) const {
  require(count_ > 0, ErrorCode::kEmptyStream, "no samples accumulated");
  BnStats s{mean_, m2_, epsilon};
  for (double& v : s.var) v /= static_cast<double>(count_);
  return s;
}

}  // namespace budgetface
