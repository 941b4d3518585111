#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rdstream/diffusion.hpp"
#include "rdstream/error.hpp"

namespace {

using namespace rdstream;

RDParams scalar(double a, double w0) {
  RDParams p = RDParams::zero(1, 1);
  p.growth(0, 0) = a;
  p.initial(0, 0) = w0;
  return p;
}

RDParams symmetric_pair(double d, double w0a, double w0b) {
  RDParams p = RDParams::zero(1, 2);
  p.diffusion(0, 0, 1) = d;
  p.diffusion(0, 1, 0) = d;
  p.initial(0, 0) = w0a;
  p.initial(0, 1) = w0b;
  return p;
}

TEST(RdDerivative, ZeroRatesGiveZero) {
  RDParams p = RDParams::zero(2, 3);
  Matrix w = oracle::random_matrix(2, 3, 1, 0.0, 1.0);
  EXPECT_EQ(rd_derivative(w, p).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RdDerivative, OneWayDiffusionByHand) {
  RDParams p = RDParams::zero(1, 2);
  p.diffusion(0, 0, 1) = 0.5;
  Matrix w(1, 2);
  w << 1.0, 3.0;
  Matrix d = rd_derivative(w, p);
  EXPECT_DOUBLE_EQ(d(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d(0, 1), 0.0);
}

TEST(RdDerivative, ReactionByHand) {
  Matrix w(1, 1);
  w << 2.0;
  EXPECT_DOUBLE_EQ(rd_derivative(w, scalar(0.1, 0.0))(0, 0), 0.2);
}

TEST(Generate, SingleSliceIsInitialState) {
  RDParams p = symmetric_pair(0.2, 0.4, 0.9);
  p.growth(0, 1) = 0.3;
  Trajectory t = generate(p, 1);
  ASSERT_EQ(t.core.dims(), (Dims{1, 1, 2}));
  EXPECT_EQ(t.state(0), p.initial);
}

TEST(Generate, ExponentialClosedForm) {
  Trajectory t = generate(scalar(0.05, 1.0), 101);
  EXPECT_NEAR(t.core(100, 0, 0) / std::exp(5.0), 1.0, 1e-3);
  for (std::size_t s = 0; s <= 100; ++s)
    EXPECT_NEAR(t.core(s, 0, 0) / std::exp(0.05 * static_cast<double>(s)), 1.0, 1e-3);
}

TEST(Generate, SymmetricDiffusionConservesAndEqualizes) {
  Trajectory t = generate(symmetric_pair(0.3, 0.0, 2.0), 200);
  for (std::size_t s = 0; s < 200; ++s) EXPECT_NEAR(t.core(s, 0, 0) + t.core(s, 0, 1), 2.0, 1e-6);
  EXPECT_NEAR(t.core(199, 0, 0), 1.0, 1e-6);
  EXPECT_NEAR(t.core(199, 0, 1), 1.0, 1e-6);
}

// Classical RK4 with unit step multiplies a linear scalar state by
// 1 + a + a^2/2 + a^3/6 + a^4/24 per step.
double rk4_factor(double a) { return 1.0 + a + a * a / 2.0 + a * a * a / 6.0 + a * a * a * a / 24.0; }

TEST(Generate, DecoupledEntriesFollowTheRk4Amplification) {
  RDParams p = RDParams::zero(2, 3);
  const double rates[6] = {-0.2, -0.05, 0.0, 0.03, 0.1, 0.2};
  for (int e = 0; e < 6; ++e) {
    p.growth(e / 3, e % 3) = rates[e];
    p.initial(e / 3, e % 3) = 0.5 + 0.1 * e;
  }
  // 0.2 * 135 keeps the fastest entry below the divergence guard
  const std::size_t length = 135;
  Trajectory t = generate(p, length);
  for (int e = 0; e < 6; ++e) {
    double exact = p.initial(e / 3, e % 3);
    for (std::size_t s = 0; s < length; ++s) {
      EXPECT_LE(std::abs(t.core(s, e / 3, e % 3) - exact), 1e-12 * exact) << "entry " << e << " step " << s;
      exact *= rk4_factor(rates[e]);
    }
  }
}

TEST(Generate, DecoupledEntriesTrackExponentialsOverTwoHundredSteps) {
  RDParams p = RDParams::zero(1, 4);
  p.growth << -0.05, -0.01, 0.02, 0.05;
  p.initial << 1.0, 0.5, 2.0, 1.0;
  Trajectory t = generate(p, 200);
  for (std::size_t s = 0; s < 200; ++s)
    for (long j = 0; j < 4; ++j) {
      const double exact = p.initial(0, j) * std::exp(p.growth(0, j) * static_cast<double>(s));
      EXPECT_LE(std::abs(t.core(s, 0, static_cast<std::size_t>(j)) - exact), 1e-6 * exact);
    }
}

TEST(Generate, ConservationOverLongRuns) {
  RDParams p = RDParams::zero(2, 3);
  const double d[3][3] = {{0, 0.1, 0.05}, {0.1, 0, 0.2}, {0.05, 0.2, 0}};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) p.diffusion(i, j, k) = d[j][k] * (1.0 + static_cast<double>(i));
  p.initial << 1.0, 0.0, 3.0, 0.2, 0.5, 0.1;
  Trajectory t = generate(p, 500);
  for (std::size_t i = 0; i < 2; ++i) {
    const double start = p.initial.row(static_cast<long>(i)).sum();
    for (std::size_t s = 0; s < 500; ++s) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 3; ++j) sum += t.core(s, i, j);
      EXPECT_LE(std::abs(sum - start), 1e-6 * start);
    }
  }
}

TEST(Generate, StaysNonnegativeUnderModerateDiffusion) {
  for (unsigned seed = 0; seed < 10; ++seed) {
    RDParams p = RDParams::zero(2, 4);
    Matrix r = oracle::random_matrix(2, 16, seed, 0.0, 1.0);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t k = 0; k < 4; ++k)
          if (j != k) p.diffusion(i, j, k) = 0.5 / 3.0 * r(static_cast<long>(i), static_cast<long>(4 * j + k));
      }
    p.initial = oracle::random_matrix(2, 4, seed + 100, 0.0, 1.0);
    p.initial(0, 0) = 0.0;
    Trajectory t = generate(p, 300);
    EXPECT_GE(t.core.min(), -1e-9) << "seed " << seed;
  }
}

TEST(Generate, DivergenceCarriesStep) {
  try {
    generate(scalar(2.0, 1.0), 100);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.step(), 0u);
    EXPECT_LT(e.step(), 100u);
  }
}

TEST(RDParams, ValidateRejectsBrokenInvariants) {
  RDParams p = RDParams::zero(1, 2);
  EXPECT_NO_THROW(p.validate());
  RDParams neg = p;
  neg.diffusion(0, 0, 1) = -0.1;
  EXPECT_ANY_THROW(neg.validate());
  RDParams diag = p;
  diag.diffusion(0, 1, 1) = 0.1;
  EXPECT_ANY_THROW(diag.validate());
  RDParams w = p;
  w.initial(0, 0) = -1.0;
  EXPECT_ANY_THROW(w.validate());
}

TEST(FitLm, FixedPointConvergesImmediately) {
  RDParams truth = symmetric_pair(0.05, 1.0, 0.3);
  truth.growth << 0.01, -0.02;
  Trajectory t = generate(truth, 60);
  LmResult r = fit_lm(t.core, truth);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LE(r.residual_norm, 1e-9);
}

TEST(FitLm, RecoversSingleExponentialRate) {
  Trajectory t = generate(scalar(0.05, 1.0), 60);
  LmResult r = fit_lm(t.core, scalar(0.0, 1.0));
  EXPECT_NEAR(r.params.growth(0, 0), 0.05, 1e-3);
  EXPECT_LE(r.residual_norm, r.initial_residual_norm);
}

TEST(FitLm, ZeroTargetWithZeroStateIsExact) {
  RDParams init = scalar(0.3, 0.0);
  LmResult r = fit_lm(Tensor3(Dims{20, 1, 1}), init);
  EXPECT_EQ(r.residual_norm, 0.0);
}

TEST(FitLm, ObservedSpaceFitKeepsInvariantsAndDescends) {
  RDParams truth = RDParams::zero(2, 2);
  truth.growth << 0.02, -0.01, 0.0, 0.015;
  truth.diffusion(0, 1, 0) = 0.05;
  truth.initial << 1.0, 0.5, 0.3, 0.8;
  Matrix wk = oracle::random_matrix(2, 5, 3, 0.1, 1.0);
  Matrix wl = oracle::random_matrix(2, 4, 4, 0.1, 1.0);
  Tensor3 target = expand(generate(truth, 40).core, wk, wl);
  RDParams init = RDParams::zero(2, 2);
  init.initial = truth.initial * 0.8;
  LmResult r = fit_lm(target, wk, wl, init);
  EXPECT_NO_THROW(r.params.validate());
  EXPECT_LE(r.residual_norm, r.initial_residual_norm);
  EXPECT_LE(r.residual_norm, 1e-3 * target.norm());
  for (double d : r.params.diffusion.values()) EXPECT_GE(d, 0.0);
  EXPECT_GE(r.params.initial.minCoeff(), 0.0);
}

TEST(FitLm, Deterministic) {
  RDParams truth = symmetric_pair(0.1, 0.2, 1.0);
  truth.growth << 0.03, -0.01;
  Tensor3 target = generate(truth, 50).core;
  Tensor3 noisy = target + oracle::random_tensor(target.dims(), 9, -0.01, 0.01);
  RDParams init = RDParams::zero(1, 2);
  init.initial << 0.5, 0.5;
  LmResult a = fit_lm(noisy, init);
  LmResult b = fit_lm(noisy, init);
  EXPECT_EQ(a.params.growth, b.params.growth);
  EXPECT_EQ(a.params.diffusion, b.params.diffusion);
  EXPECT_EQ(a.params.initial, b.params.initial);
  EXPECT_EQ(a.residual_norm, b.residual_norm);
}

TEST(FitLm, FrozenRatesOnlyMoveInitialState) {
  RDParams truth = scalar(0.02, 2.0);
  Tensor3 target = generate(truth, 30).core;
  RDParams init = scalar(0.02, 1.0);
  LmOptions opts;
  opts.fit_rates = false;
  LmResult r = fit_lm(target, init, opts);
  EXPECT_EQ(r.params.growth(0, 0), 0.02);
  EXPECT_NEAR(r.params.initial(0, 0), 2.0, 1e-6);
}

TEST(FdJacobian, ShapeMatchesParameterCount) {
  RDParams p = RDParams::zero(2, 3);
  EXPECT_EQ(parameter_count(2, 3), 2u * 3u * (3u + 2u) - 2u * 3u);
  Matrix j = fd_jacobian(p, 10, 1e-6);
  EXPECT_EQ(j.rows(), 10 * 2 * 3);
  EXPECT_EQ(j.cols(), static_cast<long>(parameter_count(2, 3)));
}

TEST(FdJacobian, RichardsonRatioIsFirstOrder) {
  RDParams p = RDParams::zero(2, 2);
  p.growth << 0.05, -0.03, 0.02, 0.04;
  p.diffusion(0, 0, 1) = 0.1;
  p.diffusion(1, 1, 0) = 0.2;
  p.initial << 1.0, 0.5, 0.8, 0.3;
  const double h = 1e-2;
  Matrix j1 = fd_jacobian(p, 30, h);
  Matrix j2 = fd_jacobian(p, 30, h / 2);
  Matrix j4 = fd_jacobian(p, 30, h / 4);
  const double ratio = (j1 - j2).norm() / (j2 - j4).norm();
  EXPECT_NEAR(ratio, 2.0, 0.2);
}

}  // namespace
