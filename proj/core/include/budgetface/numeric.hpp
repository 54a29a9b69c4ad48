#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace budgetface {

// Dense row-major matrix of doubles. All loss and metric math runs in 64-bit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Unit-L2-norm feature vector. Only constructible through normalize() or
// from_unit(), so every instance satisfies |‖v‖ - 1| <= 1e-9.
class Embedding {
 public:
  static constexpr double kUnitTolerance = 1e-9;

  // Adopts an already-normalized vector; throws kZeroVector/kNonFiniteInput
  // or kDimensionMismatch (norm off by more than kUnitTolerance).
  static Embedding from_unit(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}
  friend Embedding normalize(std::span<const double> v);

  std::vector<double> values_;
};

inline constexpr double kMinNorm = 1e-12;

// v / ‖v‖₂. Throws kZeroVector when ‖v‖₂ < 1e-12, kNonFiniteInput on NaN/inf.
Embedding normalize(std::span<const double> v);

// Clamped dot product of two unit vectors.
double cosine(std::span<const double> a, std::span<const double> b);

// C unit-norm class anchors (rows) with unique identity labels.
class AnchorSet {
 public:
  AnchorSet(Matrix anchors, std::vector<std::string> class_ids);

  // Normalizes every row of `raw` first.
  static AnchorSet from_raw(const Matrix& raw, std::vector<std::string> class_ids);

  std::size_t num_classes() const noexcept { return anchors_.rows(); }
  std::size_t dim() const noexcept { return anchors_.cols(); }
  std::span<const double> anchor(std::size_t c) const { return anchors_.row(c); }
  const Matrix& matrix() const noexcept { return anchors_; }
  const std::vector<std::string>& class_ids() const noexcept { return class_ids_; }
  std::optional<std::size_t> index_of(const std::string& id) const;

  friend bool operator==(const AnchorSet&, const AnchorSet&) = default;

 private:
  Matrix anchors_;
  std::vector<std::string> class_ids_;
};

// Entry (i, j) = clamp(f_i · W_j, -1, 1).
Matrix cosine_matrix(std::span<const Embedding> feats, const AnchorSet& anchors);

// Same computation on raw row matrices whose rows are already unit-norm.
Matrix cosine_matrix(const Matrix& unit_feats, const Matrix& unit_anchors);

// Stacks embeddings into an N×d matrix (kDimensionMismatch on ragged input).
Matrix stack(std::span<const Embedding> rows);

}  // namespace budgetface
