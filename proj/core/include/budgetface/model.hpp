#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "budgetface/margin_loss.hpp"
#include "budgetface/numeric.hpp"
#include "budgetface/rng.hpp"
#include "budgetface/training.hpp"

namespace budgetface {

// Toy embedding network used by the desk-scale harness:
//
//   a1 = relu(W1 x + b1)                    input -> hidden
//   h  = a1 + g * relu(Wr a1 + br)          residual block, g = depth gate
//   e  = W2 dropout(h) + b2                 hidden -> embedding
//   y  = gamma * (e - mean) / sqrt(var + eps) + beta    BatchNorm1d
//   f  = y / |y|
//
// plus raw class anchors (normalized on use) and a linear quality head on h.
struct ModelParams {
  Matrix w1, wr, w2;  // (out x in)
  std::vector<double> b1, br, b2;
  std::vector<double> gamma, beta;
  Matrix anchors;  // C x embed, raw
  std::vector<double> quality_w;
  double quality_b = 0.0;
  BnStats running;

  std::size_t input_dim() const noexcept { return w1.cols(); }
  std::size_t hidden_dim() const noexcept { return w1.rows(); }
  std::size_t embed_dim() const noexcept { return w2.rows(); }
  std::size_t num_classes() const noexcept { return anchors.rows(); }
};

bool operator==(const ModelParams& a, const ModelParams& b);

// He-normal weights, zero biases, unit gamma, Gaussian anchors.
ModelParams init_model(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim,
                       std::size_t num_classes, SeededRng& rng);

// Same layout as ModelParams with every entry zero (running stats excluded).
ModelParams zeros_like(const ModelParams& p);

Matrix unit_anchors(const ModelParams& p);

struct InferenceOutputs {
  Matrix hidden;      // h
  Matrix pre_bn;      // e
  Matrix embeddings;  // f, unit rows
};

// Inference mode: running BN statistics, no dropout, residual branch scaled
// by `branch_scale` (the stochastic-depth keep rate).
InferenceOutputs infer(const ModelParams& p, const Matrix& x, double branch_scale);

struct StepOutput {
  double loss = 0.0;
  BnStats batch_stats;  // population statistics of e over the batch
};

// Training-mode forward and full backward pass. `dropout_scale` is either
// empty or a B x hidden matrix of per-unit multipliers (0 or 1/(1-p)).
// Gradients are written into `grads` (same layout as `p`).
StepOutput loss_and_gradients(const ModelParams& p, const Matrix& x, std::span<const std::size_t> labels,
                              const MarginConfig& cfg, double branch_scale, const Matrix& dropout_scale,
                              ModelParams& grads);

// Loss only, same graph as loss_and_gradients (ArcNegFace modulators are
// recomputed from the current inputs).
double training_loss(const ModelParams& p, const Matrix& x, std::span<const std::size_t> labels,
                     const MarginConfig& cfg, double branch_scale, const Matrix& dropout_scale);

// Least-squares fit (ridge `lambda`) of quality_w, quality_b on hidden -> target.
void fit_quality_head(ModelParams& p, const Matrix& hidden, std::span<const double> targets, double lambda);

// Linear head output clipped to [kMinPredictedQuality, 1] so it is usable as
// an aggregation weight.
std::vector<double> predict_quality(const ModelParams& p, const Matrix& hidden);

inline constexpr double kMinPredictedQuality = 1e-3;

}  // namespace budgetface
