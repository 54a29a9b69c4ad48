#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "budgetface/error.hpp"
#include "budgetface/margin_loss.hpp"
#include "oracles.hpp"

using namespace budgetface;

namespace {

MarginConfig arcface_cfg(double s = 64.0, double m = 0.5) {
  MarginConfig c;
  c.scale = s;
  c.margin = m;
  return c;
}

MarginConfig arcneg_cfg(double s = 64.0, double m = 0.5) {
  MarginConfig c = arcface_cfg(s, m);
  c.kind = LossKind::kArcNegFace;
  return c;
}

std::vector<std::vector<double>> scaled(const Matrix& cos, double s) {
  std::vector<std::vector<double>> out(cos.rows(), std::vector<double>(cos.cols()));
  for (std::size_t i = 0; i < cos.rows(); ++i)
    for (std::size_t j = 0; j < cos.cols(); ++j) out[i][j] = s * cos(i, j);
  return out;
}

TEST(MarginedTarget, MatchesAngleAddition) {
  for (double c = -1.0; c <= 1.0; c += 0.01) {
    EXPECT_NEAR(margined_target_cos(c, 0.5), oracle::margined(c, 0.5), 1e-14) << c;
  }
  EXPECT_EQ(margined_target_cos(1.0, 0.5), std::cos(0.5));
}

// The linear fallback jumps by m sin m at the edge; it is not continuous.
TEST(MarginedTarget, FallbackBranch) {
  const double m = 0.5, edge = std::cos(std::numbers::pi - m);
  EXPECT_NEAR(margined_target_cos(edge + 1e-9, m), -1.0, 1e-6);
  EXPECT_NEAR(margined_target_cos(edge - 1e-9, m), edge - 1e-9 - m * std::sin(m), 1e-12);
  EXPECT_NEAR(margined_target_cos(-1.0, m), -1.0 - m * std::sin(m), 1e-12);
  EXPECT_EQ(margined_target_derivative(-0.99, m), 1.0);
}

TEST(ArcFace, SingleClassHasZeroLoss) {
  const Matrix cos = Matrix::from_rows({{0.3}, {-0.2}});
  const std::vector<std::size_t> labels{0, 0};
  const LossOutput out = arcface_forward(cos, labels, arcface_cfg());
  EXPECT_EQ(out.loss, 0.0);
  for (double p : out.probabilities.data()) EXPECT_EQ(p, 1.0);
  for (double g : out.grad_cos.data()) EXPECT_EQ(g, 0.0);
}

TEST(ArcFace, PerfectTargetLossIsTiny) {
  const Matrix cos = Matrix::from_rows({{1.0, 0.0}});
  const std::vector<std::size_t> labels{0};
  const LossOutput out = arcface_forward(cos, labels, arcface_cfg());
  const double target = 64.0 * std::cos(0.5);
  EXPECT_NEAR(out.logits(0, 0), 56.16528, 1e-5);
  EXPECT_DOUBLE_EQ(out.logits(0, 0), target);
  EXPECT_NEAR(out.loss, std::exp(-target), 1e-30);
  EXPECT_GT(out.loss, 4.0e-25);
  EXPECT_LT(out.loss, 4.1e-25);
}

TEST(ArcFace, ZeroMarginIsScaledSoftmaxCrossEntropy) {
  SeededRng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix cos = oracle::uniform_matrix(4, 8, -1.0, 1.0, rng);
    const auto labels = oracle::random_labels(4, 8, rng);
    const LossOutput out = arcface_forward(cos, labels, arcface_cfg(30.0, 0.0));
    EXPECT_NEAR(out.loss, oracle::softmax_ce(scaled(cos, 30.0), labels), 1e-12);
    const auto g = oracle::softmax_ce_grad(scaled(cos, 30.0), labels);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(out.grad_cos(i, j), 30.0 * g[i][j], 1e-12);
  }
}

TEST(ArcFace, MatchesReferenceWithMargin) {
  SeededRng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix cos = oracle::uniform_matrix(5, 6, -1.0, 1.0, rng);
    const auto labels = oracle::random_labels(5, 6, rng);
    const LossOutput out = arcface_forward(cos, labels, arcface_cfg(16.0, 0.4));
    EXPECT_NEAR(out.loss, oracle::margin_loss(cos, labels, {16.0, 0.4, 1.2, 0.0, 1.0}, false), 1e-12);
  }
}

TEST(ArcFace, SaturatedExampleHasVanishingGradient) {
  const Matrix cos = Matrix::from_rows({{1.0, -0.9, -0.8, -1.0}});
  const std::vector<std::size_t> labels{0};
  const LossOutput out = arcface_forward(cos, labels, arcface_cfg());
  for (double g : out.grad_cos.data()) EXPECT_LT(std::abs(g), 1e-8);
}

TEST(ArcFace, RejectsBadInputs) {
  const Matrix cos = Matrix::from_rows({{0.1, 0.2}});
  const std::vector<std::size_t> bad{2};
  EXPECT_THROW(arcface_forward(cos, bad, arcface_cfg()), Error);
  const Matrix nan = Matrix::from_rows({{0.1, std::nan("")}});
  const std::vector<std::size_t> ok{0};
  EXPECT_THROW(arcface_forward(nan, ok, arcface_cfg()), Error);
  MarginConfig c = arcface_cfg();
  c.margin = 2.0;
  EXPECT_THROW(c.validate(), Error);
  c = arcface_cfg();
  c.scale = 0.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Modulator, ClosedForms) {
  const MarginConfig c = arcneg_cfg();
  EXPECT_EQ(arcneg_modulator(0.3, 0.3, c), 1.2);
  EXPECT_NEAR(arcneg_modulator(1.0, 0.0, c), 1.2 * std::exp(-0.5), 1e-12);
  EXPECT_NEAR(arcneg_modulator(1.0, 0.0, c), 0.7278368, 1e-7);
  EXPECT_NEAR(arcneg_modulator(-1.0, 1.0, c), 1.2 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(arcneg_modulator(-1.0, 1.0, c), 0.162402, 1e-6);
}

TEST(ArcNegFace, UnitModulatorReducesToArcFace) {
  SeededRng rng(13);
  const MarginConfig c = arcneg_cfg();
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix cos = oracle::uniform_matrix(3, 5, -1.0, 1.0, rng);
    const auto labels = oracle::random_labels(3, 5, rng);
    const Matrix ones(3, 5, 1.0);
    const double neg = arcnegface_forward_with_modulators(cos, labels, c, ones).loss;
    EXPECT_NEAR(neg, arcface_forward(cos, labels, arcface_cfg()).loss, 1e-12);
  }
}

TEST(ArcNegFace, HardestNegativeIsAmplified) {
  const double m = 0.5, c_target = 0.7;
  const double y = margined_target_cos(c_target, m);
  const Matrix cos = Matrix::from_rows({{c_target, y}});
  const std::vector<std::size_t> labels{0};
  const LossOutput out = arcnegface_forward(cos, labels, arcneg_cfg());
  EXPECT_NEAR(out.logits(0, 1), 64.0 * (1.2 * y + 0.2), 1e-12);
  EXPECT_GT(out.logits(0, 1), 64.0 * y);
}

TEST(ArcNegFace, MatchesIndependentReference) {
  SeededRng rng(14);
  const MarginConfig c = arcneg_cfg();
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix cos = oracle::uniform_matrix(3, 4, -1.0, 1.0, rng);
    const auto labels = oracle::random_labels(3, 4, rng);
    EXPECT_NEAR(arcnegface_forward(cos, labels, c).loss,
                oracle::margin_loss(cos, labels, {64.0, 0.5, 1.2, 0.0, 1.0}, true), 1e-12);
  }
}

TEST(LossBackward, FiniteDifferences) {
  SeededRng rng(15);
  for (LossKind kind : {LossKind::kArcFace, LossKind::kArcNegFace}) {
    MarginConfig c = kind == LossKind::kArcFace ? arcface_cfg() : arcneg_cfg();
    c.label_smooth_eps = 0.1;
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix cos = oracle::uniform_matrix(4, 6, -0.8, 0.95, rng);
      const auto labels = oracle::random_labels(4, 6, rng);
      const Matrix t = arcneg_modulators(cos, labels, c);
      const auto f = [&](const Matrix& x) {
        return kind == LossKind::kArcFace ? arcface_forward(x, labels, c).loss
                                          : arcnegface_forward_with_modulators(x, labels, c, t).loss;
      };
      const LossOutput out = margin_loss_forward(cos, labels, c);
      const Matrix fd = oracle::finite_difference(f, cos, 1e-6);
      EXPECT_LT(oracle::max_relative_error(loss_backward(out, labels), fd, 1e-2), 1e-5);
    }
  }
}

TEST(LossBackward, StaleIntermediates) {
  const Matrix cos = Matrix::from_rows({{0.1, 0.2}, {0.3, 0.1}});
  const std::vector<std::size_t> labels{0, 1};
  LossOutput out = arcface_forward(cos, labels, arcface_cfg());
  const std::vector<std::size_t> other{1, 1};
  EXPECT_THROW(loss_backward(out, other), Error);
  out.probabilities = Matrix();
  EXPECT_THROW(loss_backward(out, labels), Error);
  try {
    loss_backward(LossOutput{}, labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kStaleIntermediates);
  }
}

TEST(LabelSmoothing, ZeroEpsIsPlainLoss) {
  SeededRng rng(16);
  const Matrix cos = oracle::uniform_matrix(4, 5, -1.0, 1.0, rng);
  const auto labels = oracle::random_labels(4, 5, rng);
  MarginConfig c = arcface_cfg(10.0, 0.3);
  const double plain = arcface_forward(cos, labels, c).loss;
  c.label_smooth_eps = 0.1;
  const LossOutput smooth = arcface_forward(cos, labels, c);
  // Smoothed CE = (1 - eps) CE + eps * mean_j(-log p_j).
  double expected = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    double uniform_term = 0.0;
    for (std::size_t j = 0; j < 5; ++j) uniform_term -= std::log(smooth.probabilities(i, j));
    expected += 0.9 * -std::log(smooth.probabilities(i, labels[i])) + 0.1 * uniform_term / 5.0;
  }
  EXPECT_NEAR(smooth.loss, expected / 4.0, 1e-12);
  EXPECT_NE(smooth.loss, plain);
}

TEST(ChainRule, FeatureAndAnchorGradientsMatchFiniteDifferences) {
  SeededRng rng(17);
  Matrix f_raw(3, 5), w_raw(4, 5);
  for (double& x : f_raw.data()) x = rng.normal();
  for (double& x : w_raw.data()) x = rng.normal();
  const std::vector<std::size_t> labels{0, 2, 3};
  const MarginConfig c = arcface_cfg(8.0, 0.3);
  const auto unit_rows = [](const Matrix& m) {
    Matrix u(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const Embedding e = normalize(m.row(r));
      std::copy(e.values().begin(), e.values().end(), u.row(r).begin());
    }
    return u;
  };
  const auto loss_of = [&](const Matrix& f, const Matrix& w) {
    return arcface_forward(cosine_matrix(unit_rows(f), unit_rows(w)), labels, c).loss;
  };
  const Matrix uf = unit_rows(f_raw), uw = unit_rows(w_raw);
  const LossOutput out = arcface_forward(cosine_matrix(uf, uw), labels, c);
  const Matrix gf_unit = feature_gradient(out.grad_cos, uw);
  const Matrix gw_unit = anchor_gradient(out.grad_cos, uf);
  Matrix gf(3, 5), gw(4, 5);
  for (std::size_t r = 0; r < 3; ++r) normalize_backward(f_raw.row(r), uf.row(r), gf_unit.row(r), gf.row(r));
  for (std::size_t r = 0; r < 4; ++r) normalize_backward(w_raw.row(r), uw.row(r), gw_unit.row(r), gw.row(r));
  const Matrix fd_f = oracle::finite_difference([&](const Matrix& f) { return loss_of(f, w_raw); }, f_raw, 1e-6);
  const Matrix fd_w = oracle::finite_difference([&](const Matrix& w) { return loss_of(f_raw, w); }, w_raw, 1e-6);
  EXPECT_LT(oracle::max_relative_error(gf, fd_f, 1e-2), 1e-6);
  EXPECT_LT(oracle::max_relative_error(gw, fd_w, 1e-2), 1e-6);
}

}  // namespace
