#include <gtest/gtest.h>

#include "hkrm/error.hpp"
#include "hkrm/grad_check.hpp"
#include "hkrm/implicit_module.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

ImplicitConfig small_config() {
  ImplicitConfig c;
  c.num_graphs = 3;
  c.mlp_dims = {4, 1};
  c.embed_dim = 2;
  return c;
}

}  // namespace

TEST(Geometry, Fixture) {
  const Matrix boxes{{10, 20, 30, 40}, {0, 0, 100, 200}};
  const double p[] = {0.9, 0.1};
  const Matrix q = geometry_features(boxes, 100, 200, p);
  EXPECT_EQ(q, (Matrix{{0.1, 0.1, 0.3, 0.2, 0.9}, {0, 0, 1, 1, 0.1}}));
  EXPECT_THROW(geometry_features(Matrix(2, 3), 100, 200, p), ShapeError);
}

TEST(ImplicitBranch, ZeroPredictorsGiveIdentity) {
  ImplicitBranch b(4, small_config(), 1);
  for (Mlp& m : b.predictors())
    for (auto& l : m.layers()) {
      for (double& v : l.weight.values()) v = 0.0;
      for (double& v : l.bias.values()) v = 0.0;
    }
  const Matrix q = test::random_matrix(5, 5, 2, 0, 1);
  const Matrix f = test::random_matrix(5, 4, 3);
  const ImplicitForward fwd = b.forward(q, f);
  EXPECT_EQ(fwd.edges.combined, Matrix::identity(5));
  EXPECT_EQ(fwd.adjacency, Matrix::identity(5));
  EXPECT_EQ(fwd.output, matmul(f, b.embed()));
}

TEST(ImplicitBranch, CombinedIsMeanOfClampedGraphsPlusIdentity) {
  const ImplicitBranch b(4, small_config(), 5);
  const Matrix q = test::random_matrix(4, 5, 6, 0, 1);
  const ImplicitEdges e = implicit_edges(q, b.predictors());
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double mean = 0.0;
      for (const Mlp& m : b.predictors()) mean += std::max(0.0, predict_edges(q, m)(i, j));
      mean /= 3.0;
      EXPECT_NEAR(e.combined(i, j), mean + (i == j ? 1.0 : 0.0), 1e-15);
    }
  const Matrix a = b.forward(q, test::random_matrix(4, 4, 7)).adjacency;
  for (double s : row_sums(a)) EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(ImplicitBranch, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ImplicitConfig cfg = small_config();
    cfg.normalize = seed != 2;
    ImplicitBranch b(4, cfg, seed);
    // Keep every predicted edge away from the clamp at 0.
    for (Mlp& m : b.predictors()) {
      m.layers().back().bias(0, 0) = 3.0;
      for (double& v : m.layers().front().bias.values()) v = 0.1;  // off the ReLU kink at |q_i - q_i| = 0
    }
    const Matrix q = test::random_matrix(5, 5, 10 + seed, 0, 1);
    Matrix f = test::random_matrix(5, 4, 20 + seed);
    const Matrix r = test::random_matrix(5, 2, 30 + seed);
    auto loss = [&] {
      const Matrix out = b.forward(q, f).output;
      double s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * r[i];
      return s;
    };
    const ImplicitForward fwd = b.forward(q, f);
    ImplicitGrads grads = b.backward(fwd, q, f, r, true);
    const Matrix fgrad = grads.features;
    ParamList params;
    b.collect(params, "implicit");
    GradList analytic;
    ImplicitBranch::append(analytic, std::move(grads));
    params.push_back({"features", &f});
    analytic.push_back(fgrad);
    const auto report = check_gradients(params, analytic, loss);
    // some weight gradients are ~1e-6, where central-difference roundoff is ~1e-11
    EXPECT_LE(report.max_relative_error, 1e-4) << report.worst_tensor << "[" << report.worst_index << "] " << report.worst_analytic << " vs " << report.worst_numeric;
  }
}

TEST(ImplicitBranch, RejectsZeroGraphs) {
  ImplicitConfig c = small_config();
  c.num_graphs = 0;
  EXPECT_THROW(validate(c), DomainError);
  EXPECT_THROW(ImplicitBranch(4, c, 1), DomainError);
  EXPECT_THROW(implicit_edges(Matrix(2, 5), std::span<const Mlp>{}), DomainError);
}
