#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "budgetface/embedding_csv.hpp"
#include "budgetface/error.hpp"
#include "budgetface/numeric.hpp"
#include "budgetface/rng.hpp"

using namespace budgetface;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kParseError;
}

TEST(Normalize, ThreeFourFive) {
  const std::vector<double> v{3.0, 4.0};
  const Embedding e = normalize(v);
  EXPECT_DOUBLE_EQ(e[0], 0.6);
  EXPECT_DOUBLE_EQ(e[1], 0.8);
}

TEST(Normalize, UnitVectorIsFixedPoint) {
  const std::vector<double> u{0.0, 1.0, 0.0};
  EXPECT_EQ(normalize(u).values()[1], 1.0);
  EXPECT_EQ(normalize(u).values()[0], 0.0);
}

TEST(Normalize, ZeroAndNonFinite) {
  const std::vector<double> z{0.0, 0.0};
  EXPECT_EQ(code_of([&] { normalize(z); }), ErrorCode::kZeroVector);
  const std::vector<double> n{1.0, std::nan("")};
  EXPECT_EQ(code_of([&] { normalize(n); }), ErrorCode::kNonFiniteInput);
  const std::vector<double> tiny{1e-13, 0.0};
  EXPECT_EQ(code_of([&] { normalize(tiny); }), ErrorCode::kZeroVector);
}

TEST(Embedding, FromUnitRejectsNonUnit) {
  EXPECT_EQ(code_of([] { Embedding::from_unit({1.0, 1.0}); }), ErrorCode::kDimensionMismatch);
  EXPECT_NO_THROW(Embedding::from_unit({1.0, 0.0}));
}

TEST(CosineMatrix, Examples) {
  const Matrix w = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const AnchorSet anchors(w, {"a", "b"});
  const std::vector<Embedding> feats{normalize(std::vector<double>{1.0, 0.0}),
                                     normalize(std::vector<double>{0.6, 0.8})};
  const Matrix c = cosine_matrix(feats, anchors);
  EXPECT_EQ(c(0, 0), 1.0);
  EXPECT_EQ(c(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 0.6);
  EXPECT_DOUBLE_EQ(c(1, 1), 0.8);
}

TEST(CosineMatrix, StaysInRange) {
  SeededRng rng(5);
  Matrix raw(30, 7);
  for (double& x : raw.data()) x = rng.normal();
  const AnchorSet a = AnchorSet::from_raw(raw, [] {
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) ids.push_back("c" + std::to_string(i));
    return ids;
  }());
  const Matrix c = cosine_matrix(a.matrix(), a.matrix());
  for (std::size_t i = 0; i < c.rows(); ++i) {
    EXPECT_LE(std::abs(c(i, i) - 1.0), 1e-15);
    for (double v : c.row(i)) EXPECT_LE(std::abs(v), 1.0);
  }
}

TEST(AnchorSet, Validation) {
  EXPECT_EQ(code_of([] { AnchorSet(Matrix::from_rows({{2.0, 0.0}}), {"a"}); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code_of([] { AnchorSet(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), {"a", "a"}); }),
            ErrorCode::kInvalidClass);
  const AnchorSet ok(Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}}), {"a", "b"});
  EXPECT_EQ(ok.index_of("b"), std::optional<std::size_t>(1));
  EXPECT_FALSE(ok.index_of("z"));
}

TEST(Rng, SplitStreamsAreDeterministicAndDistinct) {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  SeededRng root(42);
  SeededRng x = root.split("x"), y = root.split("y");
  EXPECT_NE(x.next_u64(), y.next_u64());
  double mean = 0.0;
  SeededRng u(9);
  for (int i = 0; i < 100000; ++i) mean += u.uniform();
  EXPECT_NEAR(mean / 100000.0, 0.5, 0.005);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(u.uniform_int(7), 7u);
}

TEST(VectorsCsv, RoundTripIsExact) {
  SeededRng rng(3);
  LabeledVectors v{{"p", "q", "r"}, Matrix(3, 4)};
  for (double& x : v.values.data()) x = rng.normal() * 1e-3;
  std::stringstream ss;
  write_vectors_csv(ss, v);
  const LabeledVectors back = read_vectors_csv(ss);
  EXPECT_EQ(back.ids, v.ids);
  EXPECT_EQ(back.values, v.values);
}

TEST(VectorsCsv, RejectsRaggedRows) {
  std::istringstream in("id,dim0,dim1\na,1,2\nb,1\n");
  EXPECT_EQ(code_of([&] { read_vectors_csv(in); }), ErrorCode::kDimensionMismatch);
}

TEST(AnchorCsv, RoundTrip) {
  const AnchorSet a(Matrix::from_rows({{0.6, 0.8}, {1.0, 0.0}}), {"x", "y"});
  std::stringstream ss;
  write_anchor_csv(ss, a);
  EXPECT_EQ(read_anchor_csv(ss), a);
}

}  // namespace
