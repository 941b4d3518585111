#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rdstream/error.hpp"
#include "rdstream/trend_factors.hpp"

namespace {

using namespace rdstream;

struct Instance {
  Tensor3 core;
  Matrix wk;
  Matrix wl;
  Tensor3 x;
};

Instance positive_instance(std::size_t length, std::size_t k, std::size_t l, std::size_t dk,
                           std::size_t dl, unsigned seed) {
  Instance in;
  in.core = oracle::random_tensor(Dims{length, dk, dl}, seed, 0.2, 1.0);
  in.wk = oracle::random_matrix(static_cast<long>(dk), static_cast<long>(k), seed + 1, 0.1, 1.0);
  in.wl = oracle::random_matrix(static_cast<long>(dl), static_cast<long>(l), seed + 2, 0.1, 1.0);
  in.x = expand(in.core, in.wk, in.wl);
  return in;
}

TEST(Ntd, ExactFactorizationIsRecovered) {
  Instance in;
  in.core = oracle::random_tensor(Dims{30, 2, 2}, 5, 0.2, 1.0);
  in.wk = Matrix::Zero(2, 6);
  in.wl = Matrix::Zero(2, 8);
  for (long u = 0; u < 6; ++u) in.wk(u < 3 ? 0 : 1, u) = 0.5 + 0.1 * static_cast<double>(u);
  for (long v = 0; v < 8; ++v) in.wl(v < 4 ? 0 : 1, v) = 1.0 - 0.05 * static_cast<double>(v);
  in.x = expand(in.core, in.wk, in.wl);
  NtdResult r = ntd_init(in.x, 2, 2);
  Tensor3 rec = expand(r.core, r.w_key, r.w_loc);
  EXPECT_LE((rec - in.x).norm(), 1e-3 * in.x.norm());
}

TEST(Ntd, ZeroTensorIsSafe) {
  NtdResult r = ntd_init(Tensor3(Dims{10, 3, 4}), 2, 2);
  EXPECT_TRUE(r.w_key.allFinite());
  EXPECT_TRUE(r.w_loc.allFinite());
  EXPECT_GE(r.w_key.minCoeff(), 0.0);
  ASSERT_FALSE(r.errors.empty());
  EXPECT_LE(r.errors.back(), 1e-12);
}

TEST(Ntd, RandomInstanceImprovesAndNeverIncreases) {
  Tensor3 x = oracle::random_tensor(Dims{20, 6, 8}, 8, 0.0, 1.0);
  NtdOptions opts;
  opts.iterations = 50;
  NtdResult r = ntd_init(x, 2, 3, opts);
  ASSERT_EQ(r.errors.size(), 50u);
  EXPECT_LE(r.errors[49], r.errors[4]);
  for (std::size_t i = 1; i < r.errors.size(); ++i) EXPECT_LE(r.errors[i], r.errors[i - 1] * (1 + 1e-9));
  EXPECT_GE(r.w_key.minCoeff(), 0.0);
  EXPECT_GE(r.w_loc.minCoeff(), 0.0);
  EXPECT_GE(r.core.min(), 0.0);
  // final reconstruction matches the last recorded error
  EXPECT_NEAR((expand(r.core, r.w_key, r.w_loc) - x).norm(), r.errors.back(), 1e-9 * x.norm());
}

TEST(Ntd, RandomSeedingIsDeterministic) {
  Tensor3 x = oracle::random_tensor(Dims{12, 4, 5}, 18, 0.0, 1.0);
  NtdOptions opts;
  opts.seeding = NtdSeeding::kRandom;
  opts.iterations = 20;
  NtdResult a = ntd_init(x, 2, 2, opts);
  NtdResult b = ntd_init(x, 2, 2, opts);
  EXPECT_EQ(a.w_key, b.w_key);
  EXPECT_EQ(a.errors, b.errors);
}

TEST(Ntd, RankAboveModeSizeThrows) {
  Tensor3 x(Dims{10, 3, 4}, 1.0);
  EXPECT_THROW(ntd_init(x, 4, 2), DimensionError);
  EXPECT_THROW(ntd_init(x, 2, 5), DimensionError);
}

TEST(UpdateTrendFactor, FixedPointAtExactReconstruction) {
  Instance in = positive_instance(15, 4, 5, 2, 2, 20);
  Matrix k = update_trend_factor(in.x, in.core, in.wk, in.wl, Mode::kKey);
  Matrix l = update_trend_factor(in.x, in.core, in.wk, in.wl, Mode::kLoc);
  EXPECT_LE((k - in.wk).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((l - in.wl).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(UpdateTrendFactor, StaysNonnegativeOnSignedTargets) {
  Instance in = positive_instance(15, 4, 5, 2, 3, 30);
  Tensor3 signed_target = oracle::random_tensor(in.x.dims(), 31, -1.0, 1.0);
  Matrix k = update_trend_factor(signed_target, in.core, in.wk, in.wl, Mode::kKey);
  Matrix l = update_trend_factor(signed_target, in.core, in.wk, in.wl, Mode::kLoc);
  EXPECT_GE(k.minCoeff(), 0.0);
  EXPECT_GE(l.minCoeff(), 0.0);
  Matrix zk = update_trend_factor(Tensor3(in.x.dims()), in.core, in.wk, in.wl, Mode::kKey);
  EXPECT_GE(zk.minCoeff(), 0.0);
  EXPECT_TRUE(zk.allFinite());
}

TEST(UpdateTrendFactor, AlternatingUpdatesDescend) {
  Instance truth = positive_instance(30, 5, 6, 2, 2, 40);
  Matrix wk = oracle::random_matrix(2, 5, 41, 0.1, 1.0);
  Matrix wl = oracle::random_matrix(2, 6, 42, 0.1, 1.0);
  double prev = (expand(truth.core, wk, wl) - truth.x).norm();
  for (int it = 0; it < 10; ++it) {
    const Mode m = it % 2 == 0 ? Mode::kKey : Mode::kLoc;
    if (m == Mode::kKey) wk = update_trend_factor(truth.x, truth.core, wk, wl, m);
    else wl = update_trend_factor(truth.x, truth.core, wk, wl, m);
    const double err = (expand(truth.core, wk, wl) - truth.x).norm();
    EXPECT_LE(err, prev * (1 + 1e-12) + 1e-12);
    prev = err;
  }
}

TEST(TrendFactors, TuckerScaleGauge) {
  Instance in = positive_instance(10, 4, 3, 2, 2, 50);
  Matrix wk = in.wk;
  Tensor3 core = in.core;
  const double c = 3.7;
  wk.row(1) *= c;
  for (std::size_t t = 0; t < 10; ++t)
    for (std::size_t j = 0; j < 2; ++j) core(t, 1, j) /= c;
  Tensor3 rec = expand(core, wk, in.wl);
  EXPECT_LE((rec - in.x).norm(), 1e-12 * in.x.norm());
}

TEST(TrendFactors, ReconstructionAndDifferentiationCommute) {
  RDParams rd = RDParams::zero(2, 3);
  rd.growth = oracle::random_matrix(2, 3, 60, -0.1, 0.1);
  rd.diffusion(0, 0, 2) = 0.2;
  rd.diffusion(1, 2, 1) = 0.1;
  Matrix wk = oracle::random_matrix(2, 4, 61, 0.0, 1.0);
  Matrix wl = oracle::random_matrix(3, 5, 62, 0.0, 1.0);
  Matrix w = oracle::random_matrix(2, 3, 63, 0.0, 1.0);
  Matrix dw = rd_derivative(w, rd);
  Tensor3 dcore(Dims{1, 2, 3});
  for (long i = 0; i < 2; ++i)
    for (long j = 0; j < 3; ++j) dcore(0, i, j) = dw(i, j);
  Tensor3 dx = expand(dcore, wk, wl);
  for (long u = 0; u < 4; ++u)
    for (long v = 0; v < 5; ++v) {
      double s = 0.0;
      for (long i = 0; i < 2; ++i)
        for (long j = 0; j < 3; ++j) s += wk(i, u) * wl(j, v) * dw(i, j);
      EXPECT_NEAR(dx(0, u, v), s, 1e-9);
    }
}

TEST(TrendFactors, NormalizeGaugeKeepsReconstruction) {
  TrendParams p;
  p.w_key = oracle::random_matrix(2, 4, 70, 0.1, 2.0);
  p.w_loc = oracle::random_matrix(2, 3, 71, 0.1, 1.0);
  p.rd = RDParams::zero(2, 2);
  p.rd.growth << 0.01, -0.02, 0.03, 0.0;
  p.rd.diffusion(0, 0, 1) = 0.1;
  p.rd.diffusion(1, 1, 0) = 0.05;
  p.rd.initial << 1.0, 0.5, 0.2, 0.7;
  Tensor3 before = reconstruct_trend(p, 25);
  normalize_gauge(p);
  Tensor3 after = reconstruct_trend(p, 25);
  EXPECT_LE((after - before).norm(), 1e-12 * before.norm());
  for (long i = 0; i < 2; ++i) EXPECT_NEAR(p.w_key.row(i).maxCoeff(), 1.0, 1e-15);
}

}  // namespace
