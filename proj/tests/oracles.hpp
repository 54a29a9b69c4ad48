#pragma once

// Reference implementations used only by the tests. They are written
// directly from the formulas, without sharing code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "budgetface/eval.hpp"
#include "budgetface/margin_loss.hpp"
#include "budgetface/numeric.hpp"
#include "budgetface/rng.hpp"

namespace oracle {

using budgetface::Matrix;

// Mean softmax cross-entropy of logits against integer labels.
inline double softmax_ce(const std::vector<std::vector<double>>& logits, const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    long double z = 0.0L;
    const double mx = *std::max_element(logits[i].begin(), logits[i].end());
    for (double v : logits[i]) z += std::exp(static_cast<long double>(v - mx));
    total += static_cast<double>(std::log(z)) + mx - logits[i][labels[i]];
  }
  return total / static_cast<double>(logits.size());
}

// d(mean CE)/d(logit).
inline std::vector<std::vector<double>> softmax_ce_grad(const std::vector<std::vector<double>>& logits,
                                                        const std::vector<std::size_t>& labels) {
  std::vector<std::vector<double>> g = logits;
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double mx = *std::max_element(logits[i].begin(), logits[i].end());
    double z = 0.0;
    for (double v : logits[i]) z += std::exp(v - mx);
    for (std::size_t j = 0; j < logits[i].size(); ++j)
      g[i][j] = (std::exp(logits[i][j] - mx) / z - (j == labels[i] ? 1.0 : 0.0)) / n;
  }
  return g;
}

// cos(acos(c) + m), with the linear tail c - m sin m once acos(c) + m >= pi.
inline double margined(double c, double m) {
  const double theta = std::acos(std::clamp(c, -1.0, 1.0));
  if (theta + m >= std::numbers::pi) return c - m * std::sin(m);
  return std::cos(theta + m);
}

struct NegParams {
  double s, m, alpha, mu, sigma;
};

// Additive-angular-margin loss with Gaussian-modulated negatives. alpha = 0
// selects plain negatives (logit s*c), i.e. the margin-only loss.
inline double margin_loss(const Matrix& cos, const std::vector<std::size_t>& labels, const NegParams& p,
                          bool modulate) {
  std::vector<std::vector<double>> logits(cos.rows(), std::vector<double>(cos.cols()));
  for (std::size_t i = 0; i < cos.rows(); ++i) {
    const double y = margined(cos(i, labels[i]), p.m);
    for (std::size_t j = 0; j < cos.cols(); ++j) {
      const double x = cos(i, j);
      if (j == labels[i]) {
        logits[i][j] = p.s * y;
      } else if (modulate) {
        const double d = x - y - p.mu;
        const double t = p.alpha * std::exp(-d * d / (2.0 * p.sigma));
        logits[i][j] = p.s * (t * x + t - 1.0);
      } else {
        logits[i][j] = p.s * x;
      }
    }
  }
  return softmax_ce(logits, labels);
}

// Central finite differences of f at x, one entry at a time.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double h) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t k = 0; k < x.data().size(); ++k) {
    const double v = x.data()[k];
    probe.data()[k] = v + h;
    const double up = f(probe);
    probe.data()[k] = v - h;
    const double down = f(probe);
    probe.data()[k] = v;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(const Matrix& a, const Matrix& b, double floor) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    const double x = a.data()[k], y = b.data()[k];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

struct SweepResult {
  double tpr;
  double threshold;
  double fpr;
};

// Tries every impostor value and one value above the largest impostor,
// counting accepts (score >= tau) by a linear scan each time.
inline SweepResult threshold_sweep(const budgetface::ScoreSet& s, double target) {
  std::vector<double> taus = s.impostor;
  taus.push_back(std::nextafter(*std::max_element(s.impostor.begin(), s.impostor.end()),
                                std::numeric_limits<double>::infinity()));
  SweepResult best{0.0, std::numeric_limits<double>::infinity(), 0.0};
  for (double tau : taus) {
    std::size_t fa = 0, ta = 0;
    for (double v : s.impostor) fa += v >= tau;
    for (double v : s.genuine) ta += v >= tau;
    const double fpr = static_cast<double>(fa) / static_cast<double>(s.impostor.size());
    if (fpr <= target && tau < best.threshold)
      best = {static_cast<double>(ta) / static_cast<double>(s.genuine.size()), tau, fpr};
  }
  return best;
}

inline Matrix uniform_matrix(std::size_t r, std::size_t c, double lo, double hi, budgetface::SeededRng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline std::vector<std::size_t> random_labels(std::size_t n, std::size_t c, budgetface::SeededRng& rng) {
  std::vector<std::size_t> l(n);
  for (auto& v : l) v = static_cast<std::size_t>(rng.uniform_int(c));
  return l;
}

}  // namespace oracle
