#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hkrm/error.hpp"
#include "hkrm/sgd.hpp"

using namespace hkrm;

TEST(Sgd, MatchesHandRecurrence) {
  Matrix p{{1.0, -2.0}};
  ParamList params{{"p", &p}};
  const SgdConfig cfg{0.1, 0.9, 0.01};
  SgdMomentum opt(cfg, params);
  double ref_p[2] = {1.0, -2.0};
  double ref_v[2] = {0.0, 0.0};
  const double grads[3][2] = {{0.5, -1.0}, {0.25, 2.0}, {-1.0, 0.0}};
  for (const auto& g : grads) {
    opt.step(params, {Matrix{{g[0], g[1]}}});
    for (int i = 0; i < 2; ++i) {
      ref_v[i] = 0.9 * ref_v[i] - 0.1 * (g[i] + 0.01 * ref_p[i]);
      ref_p[i] += ref_v[i];
    }
    EXPECT_DOUBLE_EQ(p(0, 0), ref_p[0]);
    EXPECT_DOUBLE_EQ(p(0, 1), ref_p[1]);
  }
  // Hand-evaluated first step: v = -0.1 * (0.5 + 0.01) = -0.051.
  Matrix q{{1.0, -2.0}};
  ParamList qp{{"q", &q}};
  SgdMomentum one(cfg, qp);
  one.step(qp, {Matrix{{0.5, -1.0}}});
  EXPECT_NEAR(q(0, 0), 1.0 - 0.051, 1e-15);
  EXPECT_NEAR(q(0, 1), -2.0 + 0.1 * (1.0 + 0.02), 1e-15);
}

TEST(Sgd, ZeroLearningRateIsNoOp) {
  Matrix p{{3.0, 4.0}};
  ParamList params{{"p", &p}};
  SgdMomentum opt({0.0, 0.9, 0.1}, params);
  for (int i = 0; i < 5; ++i) opt.step(params, {Matrix{{10.0, -10.0}}});
  EXPECT_EQ(p, (Matrix{{3.0, 4.0}}));
}

TEST(Sgd, MaskFreezesTensors) {
  Matrix a{{1.0}}, b{{1.0}};
  ParamList params{{"a", &a}, {"b", &b}};
  SgdMomentum opt({0.5, 0.0, 0.0}, params);
  const bool mask[] = {false, true};
  opt.step(params, {Matrix{{1.0}}, Matrix{{1.0}}}, mask);
  EXPECT_EQ(a(0, 0), 1.0);
  EXPECT_EQ(b(0, 0), 0.5);
  EXPECT_EQ(opt.velocity()[0](0, 0), 0.0);
}

TEST(Sgd, NonFiniteGradientThrowsBeforeUpdate) {
  Matrix a{{1.0}}, b{{1.0, 1.0}};
  ParamList params{{"a", &a}, {"b", &b}};
  SgdMomentum opt({0.5, 0.0, 0.0}, params);
  try {
    opt.step(params, {Matrix{{1.0}}, Matrix{{1.0, std::numeric_limits<double>::infinity()}}});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a(0, 0), 1.0);
}

TEST(Sgd, RejectsBadConfig) {
  Matrix a{{1.0}};
  ParamList params{{"a", &a}};
  EXPECT_THROW(SgdMomentum({-1.0, 0.9, 0.0}, params), DomainError);
  EXPECT_THROW(SgdMomentum({0.1, 1.0, 0.0}, params), DomainError);
  SgdMomentum opt({0.1, 0.9, 0.0}, params);
  EXPECT_THROW(opt.step(params, {Matrix(2, 1)}), ShapeError);
}
