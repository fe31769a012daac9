#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "hkrm/error.hpp"
#include "hkrm/matrix.hpp"
#include "hkrm/rng.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST(Matrix, HandProduct) {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  const Matrix b{{7, 8, 9}, {10, 11, 12}};
  const Matrix expected{{27, 30, 33}, {61, 68, 75}, {95, 106, 117}};
  EXPECT_EQ(matmul(a, b), expected);
}

TEST(Matrix, ProductsMatchNaiveOracle) {
  const Matrix a = test::random_matrix(7, 5, 1);
  const Matrix b = test::random_matrix(5, 4, 2);
  const Matrix c = test::random_matrix(7, 4, 3);
  EXPECT_LE(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-14);
  EXPECT_LE(max_abs_diff(matmul_tn(a, c), naive_matmul(transpose(a), c)), 1e-14);
  EXPECT_LE(max_abs_diff(matmul_nt(c, b), naive_matmul(c, transpose(b))), 1e-14);
}

TEST(Matrix, ShapeMismatchNamesShapes) {
  const Matrix a(2, 3), b(2, 3);
  try {
    (void)matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(a + Matrix(3, 2), ShapeError);
}

TEST(Matrix, ConcatAndBlocks) {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  const Matrix* blocks[] = {&a, &b};
  const Matrix c = hconcat(blocks);
  EXPECT_EQ(c, (Matrix{{1, 2, 5}, {3, 4, 6}}));
  EXPECT_EQ(column_block(c, 1, 2), (Matrix{{2, 5}, {4, 6}}));
  EXPECT_EQ(column_sums(c), (std::vector<double>{4, 6, 11}));
  EXPECT_EQ(row_sums(c), (std::vector<double>{8, 13}));
  EXPECT_EQ(sum(c), 21.0);
  const Matrix bad(3, 1);
  const Matrix* mismatched[] = {&a, &bad};
  EXPECT_THROW(hconcat(mismatched), ShapeError);
}

TEST(Matrix, ElementwiseHelpers) {
  Matrix a{{1, -2}, {3, 4}};
  EXPECT_EQ(max_abs(a), 4.0);
  axpy(2.0, Matrix{{1, 1}, {1, 1}}, a);
  EXPECT_EQ(a, (Matrix{{3, 0}, {5, 6}}));
  EXPECT_TRUE(all_finite(a));
  a(0, 0) = std::nan("");
  EXPECT_FALSE(all_finite(a));
  EXPECT_EQ(Matrix::identity(2), (Matrix{{1, 0}, {0, 1}}));
}

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    (void)c;
  }
  Rng d(42), e(43);
  EXPECT_NE(d.next_u64(), e.next_u64());
}

TEST(Rng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (const char* name : {"world", "model", "train", "eval", "knowledge"}) seeds.insert(derive_seed(7, name));
  for (std::uint64_t i = 0; i < 100; ++i) seeds.insert(derive_seed(7, "scene", i));
  EXPECT_EQ(seeds.size(), 105u);
  EXPECT_EQ(derive_seed(7, "world"), derive_seed(7, "world"));
  EXPECT_NE(derive_seed(7, "world"), derive_seed(8, "world"));
}

TEST(Rng, FnvReferenceValues) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(5);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, ns = 0.0, ns2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
    const double z = rng.normal();
    ns += z;
    ns2 += z * z;
  }
  // 5-sigma bands of the sample mean/variance.
  EXPECT_NEAR(s / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(ns / n, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(ns2 / n, 1.0, 5 * std::sqrt(2.0 / n));
}

TEST(Rng, BelowIsUniform) {
  Rng rng(9);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
}
