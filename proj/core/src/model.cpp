#include "budgetface/model.hpp"

#include <algorithm>
#include <cmath>

#include "budgetface/error.hpp"

namespace budgetface {
namespace {

// a (B x in) times w^T (w: out x in) plus bias -> B x out.
Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& b) {
  Matrix out(a.rows(), w.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto x = a.row(r);
    for (std::size_t o = 0; o < w.rows(); ++o) out(r, o) = dot(x, w.row(o)) + b[o];
  }
  return out;
}

// dW += dy^T x, db += column sums of dy.
void accumulate_affine_grads(const Matrix& dy, const Matrix& x, Matrix& dw, std::vector<double>& db) {
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    const auto xr = x.row(r);
    for (std::size_t o = 0; o < dy.cols(); ++o) {
      const double g = dy(r, o);
      db[o] += g;
      if (g == 0.0) continue;
      auto w = dw.row(o);
      for (std::size_t k = 0; k < xr.size(); ++k) w[k] += g * xr[k];
    }
  }
}

// dx = dy w.
Matrix backprop_input(const Matrix& dy, const Matrix& w) {
  Matrix dx(dy.rows(), w.cols());
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    auto out = dx.row(r);
    for (std::size_t o = 0; o < dy.cols(); ++o) {
      const double g = dy(r, o);
      if (g == 0.0) continue;
      const auto wr = w.row(o);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += g * wr[k];
    }
  }
  return dx;
}

void relu_inplace(Matrix& m) {
  for (double& x : m.data()) x = std::max(0.0, x);
}

Matrix he_normal(std::size_t out, std::size_t in, SeededRng& rng) {
  Matrix w(out, in);
  const double sd = std::sqrt(2.0 / static_cast<double>(in));
  for (double& x : w.data()) x = sd * rng.normal();
  return w;
}

struct Forward {
  Matrix z1, a1, zr, ar, h, d, e, e_hat, y, f, anchors_unit, cos;
  BnStats batch;
  std::vector<double> inv_std;
};

Forward forward_train(const ModelParams& p, const Matrix& x, double branch_scale, const Matrix& dropout_scale) {
  require(x.cols() == p.input_dim(), ErrorCode::kDimensionMismatch, "input dimension differs from model");
  require(x.rows() > 0, ErrorCode::kDimensionMismatch, "empty batch");
  require(dropout_scale.empty() || (dropout_scale.rows() == x.rows() && dropout_scale.cols() == p.hidden_dim()),
          ErrorCode::kDimensionMismatch, "dropout mask shape mismatch");
  Forward fw;
  fw.z1 = affine(x, p.w1, p.b1);
  fw.a1 = fw.z1;
  relu_inplace(fw.a1);
  fw.zr = affine(fw.a1, p.wr, p.br);
  fw.ar = fw.zr;
  relu_inplace(fw.ar);
  fw.h = fw.a1;
  for (std::size_t i = 0; i < fw.h.data().size(); ++i) fw.h.data()[i] += branch_scale * fw.ar.data()[i];
  fw.d = fw.h;
  if (!dropout_scale.empty())
    for (std::size_t i = 0; i < fw.d.data().size(); ++i) fw.d.data()[i] *= dropout_scale.data()[i];
  fw.e = affine(fw.d, p.w2, p.b2);

  const std::size_t n = x.rows();
  const std::size_t ch = p.embed_dim();
  fw.batch = BnStats{std::vector<double>(ch, 0.0), std::vector<double>(ch, 0.0), p.running.epsilon};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < ch; ++k) fw.batch.mean[k] += fw.e(r, k);
  for (double& m : fw.batch.mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < ch; ++k) {
      const double dv = fw.e(r, k) - fw.batch.mean[k];
      fw.batch.var[k] += dv * dv;
    }
  for (double& v : fw.batch.var) v /= static_cast<double>(n);
  fw.inv_std.resize(ch);
  for (std::size_t k = 0; k < ch; ++k) fw.inv_std[k] = 1.0 / std::sqrt(fw.batch.var[k] + fw.batch.epsilon);
  fw.e_hat = Matrix(n, ch);
  fw.y = Matrix(n, ch);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < ch; ++k) {
      fw.e_hat(r, k) = (fw.e(r, k) - fw.batch.mean[k]) * fw.inv_std[k];
      fw.y(r, k) = p.gamma[k] * fw.e_hat(r, k) + p.beta[k];
    }
  fw.f = Matrix(n, ch);
  for (std::size_t r = 0; r < n; ++r) {
    const Embedding u = normalize(fw.y.row(r));
    std::copy(u.values().begin(), u.values().end(), fw.f.row(r).begin());
  }
  fw.anchors_unit = unit_anchors(p);
  fw.cos = cosine_matrix(fw.f, fw.anchors_unit);
  return fw;
}

}  // namespace

bool operator==(const ModelParams& a, const ModelParams& b) {
  return a.w1 == b.w1 && a.wr == b.wr && a.w2 == b.w2 && a.b1 == b.b1 && a.br == b.br && a.b2 == b.b2 &&
         a.gamma == b.gamma && a.beta == b.beta && a.anchors == b.anchors && a.quality_w == b.quality_w &&
         a.quality_b == b.quality_b && a.running.mean == b.running.mean && a.running.var == b.running.var &&
         a.running.epsilon == b.running.epsilon;
}

ModelParams init_model(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim, std::size_t num_classes,
                       SeededRng& rng) {
  ModelParams p;
  p.w1 = he_normal(hidden_dim, input_dim, rng);
  p.wr = he_normal(hidden_dim, hidden_dim, rng);
  p.w2 = he_normal(embed_dim, hidden_dim, rng);
  p.b1.assign(hidden_dim, 0.0);
  p.br.assign(hidden_dim, 0.0);
  p.b2.assign(embed_dim, 0.0);
  p.gamma.assign(embed_dim, 1.0);
  p.beta.assign(embed_dim, 0.0);
  p.anchors = Matrix(num_classes, embed_dim);
  for (double& x : p.anchors.data()) x = rng.normal();
  p.quality_w.assign(hidden_dim, 0.0);
  p.quality_b = 0.5;
  p.running = BnStats{std::vector<double>(embed_dim, 0.0), std::vector<double>(embed_dim, 1.0), 1e-5};
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.w1 = Matrix(p.w1.rows(), p.w1.cols());
  z.wr = Matrix(p.wr.rows(), p.wr.cols());
  z.w2 = Matrix(p.w2.rows(), p.w2.cols());
  z.b1.assign(p.b1.size(), 0.0);
  z.br.assign(p.br.size(), 0.0);
  z.b2.assign(p.b2.size(), 0.0);
  z.gamma.assign(p.gamma.size(), 0.0);
  z.beta.assign(p.beta.size(), 0.0);
  z.anchors = Matrix(p.anchors.rows(), p.anchors.cols());
  z.quality_w.assign(p.quality_w.size(), 0.0);
  z.quality_b = 0.0;
  z.running = p.running;
  return z;
}

Matrix unit_anchors(const ModelParams& p) {
  Matrix out(p.anchors.rows(), p.anchors.cols());
  for (std::size_t c = 0; c < p.anchors.rows(); ++c) {
    const Embedding u = normalize(p.anchors.row(c));
    std::copy(u.values().begin(), u.values().end(), out.row(c).begin());
  }
  return out;
}

InferenceOutputs infer(const ModelParams& p, const Matrix& x, double branch_scale) {
  require(x.cols() == p.input_dim(), ErrorCode::kDimensionMismatch, "input dimension differs from model");
  InferenceOutputs out;
  Matrix a1 = affine(x, p.w1, p.b1);
  relu_inplace(a1);
  Matrix ar = affine(a1, p.wr, p.br);
  relu_inplace(ar);
  out.hidden = a1;
  for (std::size_t i = 0; i < a1.data().size(); ++i) out.hidden.data()[i] += branch_scale * ar.data()[i];
  out.pre_bn = affine(out.hidden, p.w2, p.b2);
  Matrix y = bn_normalize(out.pre_bn, p.running);
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t k = 0; k < y.cols(); ++k) y(r, k) = p.gamma[k] * y(r, k) + p.beta[k];
  out.embeddings = Matrix(y.rows(), y.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const Embedding u = normalize(y.row(r));
    std::copy(u.values().begin(), u.values().end(), out.embeddings.row(r).begin());
  }
  return out;
}

StepOutput loss_and_gradients(const ModelParams& p, const Matrix& x, std::span<const std::size_t> labels,
                              const MarginConfig& cfg, double branch_scale, const Matrix& dropout_scale,
                              ModelParams& grads) {
  const Forward fw = forward_train(p, x, branch_scale, dropout_scale);
  const LossOutput lo = margin_loss_forward(fw.cos, labels, cfg);
  grads = zeros_like(p);

  const std::size_t n = x.rows();
  const std::size_t ch = p.embed_dim();

  // cos = f A_unit^T
  const Matrix df = feature_gradient(lo.grad_cos, fw.anchors_unit);
  const Matrix da_unit = anchor_gradient(lo.grad_cos, fw.f);
  for (std::size_t c = 0; c < p.num_classes(); ++c)
    normalize_backward(p.anchors.row(c), fw.anchors_unit.row(c), da_unit.row(c), grads.anchors.row(c));

  // f = y / |y|
  Matrix dy(n, ch);
  for (std::size_t r = 0; r < n; ++r) normalize_backward(fw.y.row(r), fw.f.row(r), df.row(r), dy.row(r));

  // Batch norm, training mode.
  Matrix de(n, ch);
  for (std::size_t k = 0; k < ch; ++k) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      grads.gamma[k] += dy(r, k) * fw.e_hat(r, k);
      grads.beta[k] += dy(r, k);
      const double dxhat = dy(r, k) * p.gamma[k];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * fw.e_hat(r, k);
    }
    const double nn = static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double dxhat = dy(r, k) * p.gamma[k];
      de(r, k) = fw.inv_std[k] / nn * (nn * dxhat - sum_dxhat - fw.e_hat(r, k) * sum_dxhat_xhat);
    }
  }

  accumulate_affine_grads(de, fw.d, grads.w2, grads.b2);
  Matrix dh = backprop_input(de, p.w2);
  if (!dropout_scale.empty())
    for (std::size_t i = 0; i < dh.data().size(); ++i) dh.data()[i] *= dropout_scale.data()[i];

  Matrix dzr = dh;
  for (std::size_t i = 0; i < dzr.data().size(); ++i)
    dzr.data()[i] = fw.zr.data()[i] > 0.0 ? branch_scale * dh.data()[i] : 0.0;
  accumulate_affine_grads(dzr, fw.a1, grads.wr, grads.br);
  Matrix da1 = backprop_input(dzr, p.wr);
  for (std::size_t i = 0; i < da1.data().size(); ++i) {
    da1.data()[i] += dh.data()[i];
    if (fw.z1.data()[i] <= 0.0) da1.data()[i] = 0.0;
  }
  accumulate_affine_grads(da1, x, grads.w1, grads.b1);

  return {lo.loss, fw.batch};
}

double training_loss(const ModelParams& p, const Matrix& x, std::span<const std::size_t> labels,
                     const MarginConfig& cfg, double branch_scale, const Matrix& dropout_scale) {
  const Forward fw = forward_train(p, x, branch_scale, dropout_scale);
  return margin_loss_forward(fw.cos, labels, cfg).loss;
}

void fit_quality_head(ModelParams& p, const Matrix& hidden, std::span<const double> targets, double lambda) {
  require(hidden.rows() == targets.size() && hidden.rows() > 0, ErrorCode::kDimensionMismatch,
          "quality head: sample count mismatch");
  require(hidden.cols() == p.hidden_dim(), ErrorCode::kDimensionMismatch, "quality head: feature width mismatch");
  // Normal equations on [h, 1]; bias is not regularized.
  const std::size_t dim = hidden.cols() + 1;
  Matrix a(dim, dim);
  std::vector<double> rhs(dim, 0.0);
  std::vector<double> row(dim, 1.0);
  for (std::size_t r = 0; r < hidden.rows(); ++r) {
    std::copy(hidden.row(r).begin(), hidden.row(r).end(), row.begin());
    for (std::size_t i = 0; i < dim; ++i) {
      rhs[i] += row[i] * targets[r];
      for (std::size_t j = 0; j <= i; ++j) a(i, j) += row[i] * row[j];
    }
  }
  for (std::size_t i = 0; i + 1 < dim; ++i) a(i, i) += lambda * static_cast<double>(hidden.rows());

  // Cholesky, lower triangle in place.
  for (std::size_t j = 0; j < dim; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    require(diag > 0.0, ErrorCode::kDegenerateDistribution, "quality head: normal equations are singular");
    a(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < dim; ++i) {
      double v = a(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / a(j, j);
    }
  }
  std::vector<double> z(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double v = rhs[i];
    for (std::size_t k = 0; k < i; ++k) v -= a(i, k) * z[k];
    z[i] = v / a(i, i);
  }
  for (std::size_t i = dim; i-- > 0;) {
    double v = z[i];
    for (std::size_t k = i + 1; k < dim; ++k) v -= a(k, i) * z[k];
    z[i] = v / a(i, i);
  }
  p.quality_w.assign(z.begin(), z.end() - 1);
  p.quality_b = z.back();
}

std::vector<double> predict_quality(const ModelParams& p, const Matrix& hidden) {
  require(hidden.cols() == p.quality_w.size(), ErrorCode::kDimensionMismatch, "quality head width mismatch");
  std::vector<double> q(hidden.rows());
  for (std::size_t r = 0; r < hidden.rows(); ++r)
    q[r] = std::clamp(dot(hidden.row(r), p.quality_w) + p.quality_b, kMinPredictedQuality, 1.0);
  return q;
}

}  // namespace budgetface
