#include "budgetface/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "budgetface/error.hpp"

namespace budgetface {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r].size() == m.cols(), ErrorCode::kDimensionMismatch, "ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::kDimensionMismatch, "dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Embedding Embedding::from_unit(std::vector<double> values) {
  require(!values.empty(), ErrorCode::kZeroVector, "empty embedding");
  for (double x : values)
    require(std::isfinite(x), ErrorCode::kNonFiniteInput, "embedding entry is not finite");
  const double n = l2_norm(values);
  require(std::abs(n - 1.0) <= kUnitTolerance, ErrorCode::kDimensionMismatch,
          "embedding is not unit-norm (norm " + std::to_string(n) + ")");
  return Embedding(std::move(values));
}

Embedding normalize(std::span<const double> v) {
  for (double x : v) require(std::isfinite(x), ErrorCode::kNonFiniteInput, "normalize: non-finite entry");
  const double n = l2_norm(v);
  require(n >= kMinNorm, ErrorCode::kZeroVector, "normalize: vector norm below 1e-12");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return Embedding(std::move(out));
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

AnchorSet::AnchorSet(Matrix anchors, std::vector<std::string> class_ids)
    : anchors_(std::move(anchors)), class_ids_(std::move(class_ids)) {
  require(anchors_.rows() == class_ids_.size(), ErrorCode::kDimensionMismatch,
          "anchor rows and class ids differ in count");
  require(anchors_.rows() == 0 || anchors_.cols() > 0, ErrorCode::kDimensionMismatch,
          "anchors have zero dimension");
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < anchors_.rows(); ++c) {
    require(seen.insert(class_ids_[c]).second, ErrorCode::kInvalidClass,
            "duplicate class id '" + class_ids_[c] + "'");
    const double n = l2_norm(anchors_.row(c));
    require(std::isfinite(n) && std::abs(n - 1.0) <= Embedding::kUnitTolerance,
            ErrorCode::kDimensionMismatch, "anchor '" + class_ids_[c] + "' is not unit-norm");
  }
}

AnchorSet AnchorSet::from_raw(const Matrix& raw, std::vector<std::string> class_ids) {
  Matrix unit(raw.rows(), raw.cols());
  for (std::size_t c = 0; c < raw.rows(); ++c) {
    const Embedding e = normalize(raw.row(c));
    std::copy(e.values().begin(), e.values().end(), unit.row(c).begin());
  }
  return AnchorSet(std::move(unit), std::move(class_ids));
}

std::optional<std::size_t> AnchorSet::index_of(const std::string& id) const {
  const auto it = std::find(class_ids_.begin(), class_ids_.end(), id);
  if (it == class_ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - class_ids_.begin());
}

Matrix cosine_matrix(const Matrix& unit_feats, const Matrix& unit_anchors) {
  require(unit_feats.rows() == 0 || unit_anchors.rows() == 0 ||
              unit_feats.cols() == unit_anchors.cols(),
          ErrorCode::kDimensionMismatch, "feature and anchor dimensions differ");
  Matrix out(unit_feats.rows(), unit_anchors.rows());
  for (std::size_t i = 0; i < unit_feats.rows(); ++i)
    for (std::size_t j = 0; j < unit_anchors.rows(); ++j)
      out(i, j) = cosine(unit_feats.row(i), unit_anchors.row(j));
  return out;
}

Matrix cosine_matrix(std::span<const Embedding> feats, const AnchorSet& anchors) {
  return cosine_matrix(stack(feats), anchors.matrix());
}

Matrix stack(std::span<const Embedding> rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].dim() == m.cols(), ErrorCode::kDimensionMismatch, "embeddings differ in dimension");
    std::copy(rows[i].values().begin(), rows[i].values().end(), m.row(i).begin());
  }
  return m;
}

}  // namespace budgetface
