#include "budgetface/margin_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "budgetface/error.hpp"

namespace budgetface {
namespace {

constexpr double kMinSin = 1e-12;

void check_inputs(const Matrix& cos, std::span<const std::size_t> labels) {
  require(cos.rows() > 0 && cos.cols() > 0, ErrorCode::kDimensionMismatch, "empty cosine matrix");
  require(labels.size() == cos.rows(), ErrorCode::kDimensionMismatch,
          "label count does not match batch size");
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] < cos.cols(), ErrorCode::kInvalidLabel,
            "label " + std::to_string(labels[i]) + " out of range for " + std::to_string(cos.cols()) +
                " classes");
  for (double x : cos.data()) require(std::isfinite(x), ErrorCode::kNonFiniteInput, "non-finite cosine");
}

// Shared softmax cross-entropy over precomputed logits. Fills loss,
// probabilities and grad_cos (via loss_backward).
LossOutput finish(Matrix logits, Matrix dlogit_dcos, std::span<const std::size_t> labels, double eps) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  LossOutput out;
  out.probabilities = Matrix(n, c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    const std::size_t arg = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    const double zmax = z[arg];
    // log-sum-exp as zmax + log1p(sum over non-max terms) keeps tiny losses.
    double rest = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      if (j != arg) rest += std::exp(z[j] - zmax);
    const double log_sum = std::log1p(rest);
    const double lse = zmax + log_sum;
    for (std::size_t j = 0; j < c; ++j) out.probabilities(i, j) = std::exp(z[j] - lse);

    const std::size_t y = labels[i];
    double row_loss = (zmax - z[y]) + log_sum;  // -log p_y
    if (eps > 0.0) {
      double mean_neg_log_p = 0.0;
      for (std::size_t j = 0; j < c; ++j) mean_neg_log_p += lse - z[j];
      mean_neg_log_p /= static_cast<double>(c);
      row_loss = (1.0 - eps) * row_loss + eps * mean_neg_log_p;
    }
    total += row_loss;
  }
  out.loss = total / static_cast<double>(n);
  out.logits = std::move(logits);
  out.dlogit_dcos = std::move(dlogit_dcos);
  out.labels.assign(labels.begin(), labels.end());
  out.label_smooth_eps = eps;
  out.grad_cos = loss_backward(out, labels);
  return out;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::kArcFace ? "arcface" : "arcnegface";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "arcface") return LossKind::kArcFace;
  if (name == "arcnegface") return LossKind::kArcNegFace;
  fail(ErrorCode::kInvalidConfig, "unknown loss '" + std::string(name) + "'");
}

void MarginConfig::validate() const {
  const auto all_finite = std::isfinite(scale) && std::isfinite(margin) && std::isfinite(neg_alpha) &&
                          std::isfinite(neg_mu) && std::isfinite(neg_sigma) &&
                          std::isfinite(label_smooth_eps);
  require(all_finite, ErrorCode::kInvalidConfig, "margin config has non-finite fields");
  require(scale > 0.0, ErrorCode::kInvalidConfig, "scale must be positive");
  require(margin >= 0.0 && margin < std::numbers::pi / 2, ErrorCode::kInvalidConfig,
          "margin must lie in [0, pi/2)");
  require(neg_alpha > 0.0, ErrorCode::kInvalidConfig, "neg_alpha must be positive");
  require(neg_sigma > 0.0, ErrorCode::kInvalidConfig, "neg_sigma must be positive");
  require(label_smooth_eps >= 0.0 && label_smooth_eps < 1.0, ErrorCode::kInvalidConfig,
          "label_smooth_eps must lie in [0, 1)");
}

double margined_target_cos(double c, double margin) {
  c = std::clamp(c, -1.0, 1.0);
  if (c <= std::cos(std::numbers::pi - margin)) return c - margin * std::sin(margin);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return c * std::cos(margin) - s * std::sin(margin);
}

double margined_target_derivative(double c, double margin) {
  c = std::clamp(c, -1.0, 1.0);
  if (c <= std::cos(std::numbers::pi - margin)) return 1.0;
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  return std::cos(margin) + c * std::sin(margin) / std::max(s, kMinSin);
}

double arcneg_modulator(double cos_neg, double cos_target_margined, const MarginConfig& cfg) {
  const double d = cos_neg - cos_target_margined - cfg.neg_mu;
  return cfg.neg_alpha * std::exp(-(d * d) / (2.0 * cfg.neg_sigma));
}

Matrix arcneg_modulators(const Matrix& cos, std::span<const std::size_t> labels, const MarginConfig& cfg) {
  check_inputs(cos, labels);
  Matrix t(cos.rows(), cos.cols(), 1.0);
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    const double target = margined_target_cos(cos(i, labels[i]), cfg.margin);
    for (std::size_t j = 0; j < cos.cols(); ++j)
      if (j != labels[i]) t(i, j) = arcneg_modulator(std::clamp(cos(i, j), -1.0, 1.0), target, cfg);
  }
  return t;
}

LossOutput arcface_forward(const Matrix& cos, std::span<const std::size_t> labels, const MarginConfig& cfg) {
  cfg.validate();
  check_inputs(cos, labels);
  const double s = cfg.scale;
  Matrix logits(cos.rows(), cos.cols());
  Matrix dz(cos.rows(), cos.cols(), s);
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    for (std::size_t j = 0; j < cos.cols(); ++j) logits(i, j) = s * std::clamp(cos(i, j), -1.0, 1.0);
    const std::size_t y = labels[i];
    logits(i, y) = s * margined_target_cos(cos(i, y), cfg.margin);
    dz(i, y) = s * margined_target_derivative(cos(i, y), cfg.margin);
  }
  return finish(std::move(logits), std::move(dz), labels, cfg.label_smooth_eps);
}

LossOutput arcnegface_forward_with_modulators(const Matrix& cos, std::span<const std::size_t> labels,
                                              const MarginConfig& cfg, const Matrix& modulators) {
  cfg.validate();
  check_inputs(cos, labels);
  require(modulators.rows() == cos.rows() && modulators.cols() == cos.cols(),
          ErrorCode::kDimensionMismatch, "modulator matrix shape differs from cosine matrix");
  const double s = cfg.scale;
  Matrix logits(cos.rows(), cos.cols());
  Matrix dz(cos.rows(), cos.cols());
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    const std::size_t y = labels[i];
    for (std::size_t j = 0; j < cos.cols(); ++j) {
      if (j == y) {
        logits(i, j) = s * margined_target_cos(cos(i, j), cfg.margin);
        dz(i, j) = s * margined_target_derivative(cos(i, j), cfg.margin);
      } else {
        const double t = modulators(i, j);
        logits(i, j) = s * (t * std::clamp(cos(i, j), -1.0, 1.0) + t - 1.0);
        dz(i, j) = s * t;
      }
    }
  }
  return finish(std::move(logits), std::move(dz), labels, cfg.label_smooth_eps);
}

LossOutput arcnegface_forward(const Matrix& cos, std::span<const std::size_t> labels, const MarginConfig& cfg) {
  cfg.validate();
  return arcnegface_forward_with_modulators(cos, labels, cfg, arcneg_modulators(cos, labels, cfg));
}

LossOutput margin_loss_forward(const Matrix& cos, std::span<const std::size_t> labels, const MarginConfig& cfg) {
  return cfg.kind == LossKind::kArcFace ? arcface_forward(cos, labels, cfg)
                                        : arcnegface_forward(cos, labels, cfg);
}

Matrix loss_backward(const LossOutput& out, std::span<const std::size_t> labels) {
  const std::size_t n = out.probabilities.rows();
  const std::size_t c = out.probabilities.cols();
  const bool consistent = n > 0 && out.dlogit_dcos.rows() == n && out.dlogit_dcos.cols() == c &&
                          out.logits.rows() == n && out.logits.cols() == c && out.labels.size() == n;
  require(consistent, ErrorCode::kStaleIntermediates, "forward intermediates missing or inconsistent");
  require(std::equal(labels.begin(), labels.end(), out.labels.begin(), out.labels.end()),
          ErrorCode::kStaleIntermediates, "labels differ from those of the forward pass");

  const double eps = out.label_smooth_eps;
  const double smooth = eps / static_cast<double>(c);
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix grad(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t y = labels[i];
    // p_y - 1 is formed as -sum_{j != y} p_j to keep precision when p_y ~ 1.
    double others = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == y) continue;
      others += out.probabilities(i, j);
      grad(i, j) = (out.probabilities(i, j) - smooth) * out.dlogit_dcos(i, j) * inv_n;
    }
    grad(i, y) = (-others + eps - smooth) * out.dlogit_dcos(i, y) * inv_n;
  }
  return grad;
}

Matrix feature_gradient(const Matrix& grad_cos, const Matrix& unit_anchors) {
  require(grad_cos.cols() == unit_anchors.rows(), ErrorCode::kDimensionMismatch,
          "gradient columns do not match anchor count");
  Matrix out(grad_cos.rows(), unit_anchors.cols());
  for (std::size_t i = 0; i < grad_cos.rows(); ++i)
    for (std::size_t j = 0; j < grad_cos.cols(); ++j) {
      const double g = grad_cos(i, j);
      if (g == 0.0) continue;
      const auto w = unit_anchors.row(j);
      auto o = out.row(i);
      for (std::size_t k = 0; k < w.size(); ++k) o[k] += g * w[k];
    }
  return out;
}

Matrix anchor_gradient(const Matrix& grad_cos, const Matrix& unit_feats) {
  require(grad_cos.rows() == unit_feats.rows(), ErrorCode::kDimensionMismatch,
          "gradient rows do not match feature count");
  Matrix out(grad_cos.cols(), unit_feats.cols());
  for (std::size_t i = 0; i < grad_cos.rows(); ++i) {
    const auto f = unit_feats.row(i);
    for (std::size_t j = 0; j < grad_cos.cols(); ++j) {
      const double g = grad_cos(i, j);
      if (g == 0.0) continue;
      auto o = out.row(j);
      for (std::size_t k = 0; k < f.size(); ++k) o[k] += g * f[k];
    }
  }
  return out;
}

void normalize_backward(std::span<const double> raw, std::span<const double> unit,
                        std::span<const double> grad_unit, std::span<double> grad_raw) {
  require(raw.size() == unit.size() && unit.size() == grad_unit.size() && grad_raw.size() == raw.size(),
          ErrorCode::kDimensionMismatch, "normalize_backward: length mismatch");
  const double norm = l2_norm(raw);
  require(norm >= kMinNorm, ErrorCode::kZeroVector, "normalize_backward: zero vector");
  const double proj = dot(unit, grad_unit);
  for (std::size_t k = 0; k < raw.size(); ++k) grad_raw[k] = (grad_unit[k] - unit[k] * proj) / norm;
}

}  // namespace budgetface
