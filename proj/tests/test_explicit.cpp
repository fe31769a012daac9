#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "hkrm/error.hpp"
#include "hkrm/explicit_module.hpp"
#include "hkrm/grad_check.hpp"
#include "test_util.hpp"

using namespace hkrm;

namespace {

double weighted_sum(const Matrix& m, const Matrix& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m[i] * r[i];
  return s;
}

ExplicitConfig small_config(Activation act = Activation::identity) {
  ExplicitConfig c;
  c.mlp_dims = {6, 1};
  c.embed_dim = 3;
  c.final_activation = act;
  return c;
}

PriorGraph random_prior(std::size_t classes, std::uint64_t seed) {
  PriorGraph g;
  g.edges = test::random_matrix(classes, classes, seed, 0.0, 1.0);
  for (std::size_t i = 0; i < classes; ++i) {
    g.class_names.push_back("c" + std::to_string(i));
    for (std::size_t j = 0; j < i; ++j) g.edges(i, j) = g.edges(j, i);
  }
  return g;
}

}  // namespace

TEST(Edges, PairwiseL1Fixture) {
  const Matrix f{{1, 2}, {4, 0}, {1, -1}};
  const Matrix d = pairwise_l1(f);
  ASSERT_EQ(d.rows(), 9u);
  const Matrix expected{{0, 0}, {3, 2}, {0, 3}, {3, 2}, {0, 0}, {3, 1}, {0, 3}, {3, 1}, {0, 0}};
  EXPECT_EQ(d, expected);
}

TEST(Edges, PairIndexOrder) {
  const PairIndex p(3);
  ASSERT_EQ(p.size(), 6u);
  const std::pair<std::size_t, std::size_t> expected[] = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
  for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(p[k], expected[k]);
}

TEST(Edges, PredictedEdgesAreSymmetricWithConstantDiagonal) {
  const Mlp mlp = Mlp::he_uniform(4, {5, 1}, Activation::identity, 2);
  const Matrix f = test::random_matrix(7, 4, 3);
  const Matrix e = predict_edges(f, mlp);
  const double diag = mlp.forward(Matrix(1, 4))(0, 0);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(e(i, i), diag);
    for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(e(i, j), e(j, i));
  }
}

TEST(Edges, LossHandValues) {
  const EdgeLoss l = edge_loss(Matrix{{0.5}}, Matrix{{0.0}});
  EXPECT_EQ(l.value, 0.125);
  EXPECT_EQ(l.grad(0, 0), 0.5);
  const Matrix w{{1, 0}, {0, 1}};
  const EdgeLoss masked = edge_loss(Matrix{{1, 5}, {5, 3}}, Matrix{{0, 0}, {0, 1}}, &w, 0.25);
  EXPECT_EQ(masked.value, 0.25 * (0.5 + 2.0));
  EXPECT_EQ(masked.grad, (Matrix{{0.25, 0}, {0, 0.5}}));
  const EdgeLoss zero = edge_loss(Matrix{{0.3, 0.2}}, Matrix{{0.3, 0.2}});
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(max_abs(zero.grad), 0.0);
}

TEST(Edges, NormalizeRows) {
  EXPECT_EQ(normalize_rows(Matrix{{1, 1, 2}}), (Matrix{{0.25, 0.25, 0.5}}));
  EXPECT_EQ(normalize_rows(Matrix{{-3, 1, 1}}), (Matrix{{0, 0.5, 0.5}}));
  EXPECT_EQ(normalize_rows(Matrix{{0, -1, 0}}), (Matrix{{0, 0, 0}}));
  EXPECT_EQ(normalize_rows(Matrix{{1, 1}}, 2.0), (Matrix{{0.25, 0.25}}));
  const Matrix raw = test::random_matrix(6, 6, 5, 0.1, 1.0);
  const Matrix a = normalize_rows(raw);
  for (double s : row_sums(a)) EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(Edges, NormalizeBackwardMatchesFiniteDifferences) {
  for (bool clamp : {true, false}) {
    Matrix raw = test::random_matrix(4, 4, 6, clamp ? -0.5 : 0.1, 1.0);
    const Matrix r = test::random_matrix(4, 4, 7);
    const double eps = 0.1;
    const Matrix grad = normalize_rows_backward(raw, normalize_rows(raw, eps, clamp), r, eps, clamp);
    ParamList params{{"raw", &raw}};
    const auto report =
        check_gradients(params, {grad}, [&] { return weighted_sum(normalize_rows(raw, eps, clamp), r); });
    EXPECT_LE(report.max_relative_error, 1e-6);
  }
}

TEST(Edges, PropagateIsLinear) {
  const Matrix a = test::random_matrix(5, 5, 1, 0, 1);
  const Matrix f = test::random_matrix(5, 3, 2);
  const Matrix g = test::random_matrix(5, 3, 3);
  const Matrix w = test::random_matrix(3, 4, 4);
  Matrix mix = f;
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * f[i] - 3.0 * g[i];
  const Matrix lhs = propagate(a, mix, w);
  const Matrix pf = propagate(a, f, w), pg = propagate(a, g, w);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], 2.0 * pf[i] - 3.0 * pg[i], 1e-12);
  EXPECT_THROW(propagate(Matrix(4, 4), f, w), ShapeError);
}

TEST(ExplicitBranch, PermutationEquivariant) {
  const ExplicitBranch b(4, small_config(), 9);
  const Matrix f = test::random_matrix(6, 4, 10);
  const std::size_t perm[] = {3, 0, 5, 1, 4, 2};
  Matrix pf(6, 4);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 4; ++k) pf(i, k) = f(perm[i], k);
  const Matrix out = b.forward(f).output;
  const Matrix pout = b.forward(pf).output;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < out.cols(); ++k) EXPECT_NEAR(pout(i, k), out(perm[i], k), 1e-12);
}

TEST(ExplicitBranch, GradientsMatchFiniteDifferences) {
  for (Activation act : {Activation::identity, Activation::sigmoid}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      ExplicitConfig cfg = small_config(act);
      cfg.mean_edge_loss = seed == 2;
      cfg.normalize_epsilon = seed == 3 ? 0.5 : 0.0;
      ExplicitBranch b(4, cfg, seed);
      // Shift the final bias so identity-activation edges stay positive and
      // the ReLU clamp in normalization is inactive at the probe point.
      if (act == Activation::identity) b.predictor().layers().back().bias(0, 0) = 2.0;
      // Diagonal pairs feed |f_i - f_i| = 0, so with zero hidden biases they sit
      // on the ReLU kink; probe away from it.
      for (double& v : b.predictor().layers().front().bias.values()) v = 0.1;
      Matrix f = test::random_matrix(5, 4, 100 + seed);
      const PriorGraph prior = random_prior(3, 200 + seed);
      const std::size_t classes[] = {0, 2, 1, 1, 0};
      const Matrix target = target_edges(classes, prior);
      const Matrix w = supervision_weights({true, true, false, true, true});
      const Matrix r = test::random_matrix(5, 3, 300 + seed);
      const double lambda = 0.7;

      auto loss = [&] {
        const ExplicitForward fwd = b.forward(f);
        return weighted_sum(fwd.output, r) + lambda * b.supervise(fwd, target, &w).value;
      };
      const ExplicitForward fwd = b.forward(f);
      EdgeLoss el = b.supervise(fwd, target, &w);
      Matrix eg = el.grad;
      for (double& v : eg.values()) v *= lambda;
      ExplicitGrads grads = b.backward(fwd, f, r, &eg, true);
      const Matrix fgrad = grads.features;

      ParamList params;
      b.collect(params, "explicit");
      GradList analytic;
      ExplicitBranch::append(analytic, std::move(grads));
      params.push_back({"features", &f});
      analytic.push_back(fgrad);
      const auto report = check_gradients(params, analytic, loss);
      EXPECT_LE(report.max_relative_error, 1e-5)
          << to_string(act) << " seed " << seed << " " << report.worst_tensor << "[" << report.worst_index << "]";
    }
  }
}

TEST(ExplicitBranch, ZeroLossAtTarget) {
  const ExplicitBranch b(4, small_config(), 4);
  const Matrix f = test::random_matrix(5, 4, 5);
  const ExplicitForward fwd = b.forward(f);
  const EdgeLoss l = b.supervise(fwd, fwd.edges.edges, nullptr);
  EXPECT_EQ(l.value, 0.0);
  ExplicitGrads g = b.backward(fwd, f, Matrix(5, 3), &l.grad, false);
  for (const auto& w : g.predictor.weight) EXPECT_EQ(max_abs(w), 0.0);
  for (const auto& w : g.predictor.bias) EXPECT_EQ(max_abs(w), 0.0);
}

TEST(ExplicitBranch, TargetEdgesAndValidation) {
  const PriorGraph prior = random_prior(3, 1);
  const std::size_t classes[] = {2, 0};
  const Matrix t = target_edges(classes, prior);
  EXPECT_EQ(t(0, 1), prior.edges(2, 0));
  EXPECT_EQ(t(1, 1), prior.edges(0, 0));
  const std::size_t bad[] = {3};
  EXPECT_THROW(target_edges(bad, prior), DomainError);
  ExplicitConfig c = small_config();
  c.mlp_dims = {4, 2};
  EXPECT_THROW(validate(c), DomainError);
  c = small_config();
  c.embed_dim = 0;
  EXPECT_THROW(validate(c), DomainError);
}
