#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "budgetface/numeric.hpp"

namespace budgetface {

enum class LossKind { kArcFace, kArcNegFace };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

struct MarginConfig {
  LossKind kind = LossKind::kArcFace;
  double scale = 64.0;   // s
  double margin = 0.5;   // m, radians
  // Gaussian modulator G(x, y) = alpha * exp(-(x - y - mu)^2 / (2 sigma)).
  double neg_alpha = 1.2;
  double neg_mu = 0.0;
  double neg_sigma = 1.0;
  double label_smooth_eps = 0.0;

  // Throws kInvalidConfig unless s > 0, 0 <= m < pi/2, alpha > 0, sigma > 0,
  // 0 <= eps < 1 and all fields are finite.
  void validate() const;
};

// Forward result. `logits` are post-margin and post-scale; `grad_cos` holds
// d(mean loss)/d(cos) for every entry. The remaining members are the
// intermediates loss_backward() consumes.
struct LossOutput {
  double loss = 0.0;
  Matrix logits;
  Matrix grad_cos;

  Matrix probabilities;
  Matrix dlogit_dcos;
  std::vector<std::size_t> labels;
  double label_smooth_eps = 0.0;
};

// cos(theta + m) for cos(theta) = c, with the linear fallback c - m sin(m)
// once c <= cos(pi - m). c is clamped to [-1, 1] first.
double margined_target_cos(double c, double margin);
// d margined_target_cos / dc on the branch the forward pass takes.
double margined_target_derivative(double c, double margin);

double arcneg_modulator(double cos_neg, double cos_target_margined, const MarginConfig& cfg);

// N×C matrix of modulators t_{j,y_i}; the target column holds 1.
Matrix arcneg_modulators(const Matrix& cos, std::span<const std::size_t> labels,
                         const MarginConfig& cfg);

LossOutput arcface_forward(const Matrix& cos, std::span<const std::size_t> labels,
                           const MarginConfig& cfg);

LossOutput arcnegface_forward(const Matrix& cos, std::span<const std::size_t> labels,
                              const MarginConfig& cfg);

// ArcNegFace with caller-supplied (frozen) modulators. This is the graph the
// backward pass differentiates: t never receives gradient.
LossOutput arcnegface_forward_with_modulators(const Matrix& cos, std::span<const std::size_t> labels,
                                              const MarginConfig& cfg, const Matrix& modulators);

// Dispatches on cfg.kind.
LossOutput margin_loss_forward(const Matrix& cos, std::span<const std::size_t> labels,
                               const MarginConfig& cfg);

// Recomputes d loss / d cos from the stored intermediates. Throws
// kStaleIntermediates if they are missing, inconsistent, or were produced
// for different labels.
Matrix loss_backward(const LossOutput& out, std::span<const std::size_t> labels);

// Chain-rule helpers for cos_ij = f_i · W_j on unit vectors.
Matrix feature_gradient(const Matrix& grad_cos, const Matrix& unit_anchors);
Matrix anchor_gradient(const Matrix& grad_cos, const Matrix& unit_feats);

// Back-propagates through u = v / ‖v‖: grad_v = (grad_u - u (u · grad_u)) / ‖v‖.
void normalize_backward(std::span<const double> raw, std::span<const double> unit,
                        std::span<const double> grad_unit, std::span<double> grad_raw);

}  // namespace budgetface
