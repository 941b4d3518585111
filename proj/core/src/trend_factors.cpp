#include "rdstream/trend_factors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

// unfold(core x_other W_other, mode): the latent side of the factor update.
Matrix latent_unfolding(const Tensor3& core, const Matrix& w_key, const Matrix& w_loc, Mode mode) {
  if (mode == Mode::kKey) {
    return unfold(mode_product(core, w_loc, Mode::kLoc, Contract::kRows), Mode::kKey);
  }
  return unfold(mode_product(core, w_key, Mode::kKey, Contract::kRows), Mode::kLoc);
}

Matrix multiplicative_step(const Matrix& w, const Matrix& g, const Matrix& x_unfolded) {
  const Matrix numer = (g * x_unfolded.transpose()).cwiseMax(kFactorEpsilon);
  const Matrix denom = ((g * g.transpose()) * w).cwiseMax(kFactorEpsilon);
  return w.cwiseProduct(numer).cwiseQuotient(denom).cwiseMax(kFactorEpsilon);
}

// Exact nonnegative minimization over one factor row at a time (HALS).
// g is the latent unfolding, x_unfolded the observed one.
void hals_factor(Matrix& w, const Matrix& g, const Matrix& x_unfolded) {
  const Matrix p = g * x_unfolded.transpose();
  const Matrix q = g * g.transpose();
  for (Index r = 0; r < w.rows(); ++r) {
    if (q(r, r) <= 0.0) continue;
    const Eigen::RowVectorXd step = (p.row(r) - q.row(r) * w) / q(r, r);
    w.row(r) = (w.row(r) + step).cwiseMax(kFactorEpsilon);
  }
}

// Same rule for the core, one latent entry (i, j) at a time across all slices.
void hals_core(Tensor3& core, const Tensor3& x, const Matrix& w_key, const Matrix& w_loc) {
  const Tensor3 numer = project(x, w_key, w_loc);
  const Matrix gk = w_key * w_key.transpose();
  const Matrix gl = w_loc * w_loc.transpose();
  const Dims& d = core.dims();
  for (std::size_t i = 0; i < d.key; ++i)
    for (std::size_t j = 0; j < d.loc; ++j) {
      const double a = gk(idx(i), idx(i)) * gl(idx(j), idx(j));
      if (a <= 0.0) continue;
      for (std::size_t t = 0; t < d.time; ++t) {
        double fitted = 0.0;
        for (std::size_t p = 0; p < d.key; ++p)
          for (std::size_t q = 0; q < d.loc; ++q) fitted += gk(idx(i), idx(p)) * core(t, p, q) * gl(idx(q), idx(j));
        core(t, i, j) = std::max(kFactorEpsilon, core(t, i, j) + (numer(t, i, j) - fitted) / a);
      }
    }
}

// NNDSVD seed of a d x n factor from the n x m unfolding: the dominant
// singular vectors split into positive and negative parts, keeping the part
// with the larger mass. Exact zeros are filled with a small fraction of the
// mean so the multiplicative updates can still revive them.
Matrix nndsvd_factor(const Matrix& x_unfolded, std::size_t d) {
  const Matrix gram = x_unfolded * x_unfolded.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Index n = gram.rows();
  Matrix w = Matrix::Zero(idx(d), n);
  for (std::size_t r = 0; r < d; ++r) {
    const Index col = n - 1 - idx(r);  // eigenvalues ascend
    const double sigma = std::sqrt(std::max(eig.eigenvalues()(col), 0.0));
    if (sigma <= 0.0) continue;
    const Vector u = eig.eigenvectors().col(col);
    const Vector v = x_unfolded.transpose() * u / sigma;
    if (r == 0) {
      w.row(0) = (std::sqrt(sigma) * u.cwiseAbs()).transpose();
      continue;
    }
    const Vector up = u.cwiseMax(0.0);
    const Vector un = (-u).cwiseMax(0.0);
    const Vector vp = v.cwiseMax(0.0);
    const Vector vn = (-v).cwiseMax(0.0);
    const double mp = up.norm() * vp.norm();
    const double mn = un.norm() * vn.norm();
    const Vector& part = mp >= mn ? up : un;
    const double mass = std::max(mp, mn);
    if (part.norm() > 0.0) w.row(idx(r)) = (std::sqrt(sigma * mass) / part.norm() * part).transpose();
  }
  const double fill = 1e-4 * std::max(w.mean(), kFactorEpsilon);
  for (Index i = 0; i < w.size(); ++i) {
    if (w.data()[i] <= 0.0) w.data()[i] = fill;
  }
  return w;
}

// Nonnegative factorizations are unique only up to mixing. Subtracting the
// largest feasible multiple of row j from row i (and adding the same multiple
// of core slab i to slab j) keeps both sides nonnegative and the product
// fixed, and moves the factors onto the boundary of the nonnegative cone.
void peel_rows(Matrix& w, Tensor3& core, Mode mode) {
  const Index d = w.rows();
  const Dims& cd = core.dims();
  for (int sweep = 0; sweep < 10; ++sweep) {
    bool changed = false;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        if (i == j) continue;
        double alpha = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < w.cols(); ++c) {
          if (w(j, c) > kFactorEpsilon) alpha = std::min(alpha, w(i, c) / w(j, c));
        }
        if (!std::isfinite(alpha) || alpha <= 1e-9 * (1.0 + w.row(i).maxCoeff() / w.row(j).maxCoeff())) continue;
        w.row(i) = (w.row(i) - alpha * w.row(j)).cwiseMax(kFactorEpsilon);
        for (std::size_t t = 0; t < cd.time; ++t) {
          if (mode == Mode::kKey) {
            for (std::size_t v = 0; v < cd.loc; ++v)
              core(t, static_cast<std::size_t>(j), v) += alpha * core(t, static_cast<std::size_t>(i), v);
          } else {
            for (std::size_t u = 0; u < cd.key; ++u)
              core(t, u, static_cast<std::size_t>(j)) += alpha * core(t, u, static_cast<std::size_t>(i));
          }
        }
        changed = true;
      }
    if (!changed) break;
  }
}

}  // namespace

Tensor3 reconstruct_trend(const TrendParams& params, std::size_t length) {
  return expand(generate(params.rd, length).core, params.w_key, params.w_loc);
}

NtdResult ntd_init(const Tensor3& trend, std::size_t dk, std::size_t dl, const NtdOptions& options) {
  const Dims& d = trend.dims();
  if (dk == 0 || dl == 0) throw DimensionError("trend ranks must be >= 1");
  if (dk > d.key || dl > d.loc) {
    throw DimensionError("trend ranks (" + std::to_string(dk) + ", " + std::to_string(dl) +
                         ") exceed the tensor's keyword/location sizes; reduce the rank");
  }
  Tensor3 x = trend;
  for (double& v : x.data()) v = std::max(v, 0.0);

  NtdResult result;
  if (x.max() == 0.0) {
    result.w_key = Matrix::Constant(idx(dk), idx(d.key), kFactorEpsilon);
    result.w_loc = Matrix::Constant(idx(dl), idx(d.loc), kFactorEpsilon);
    result.core = Tensor3({d.time, dk, dl});
    result.errors.assign(static_cast<std::size_t>(std::max(options.iterations, 0)), 0.0);
    return result;
  }

  const Matrix x_key = unfold(x, Mode::kKey);
  const Matrix x_loc = unfold(x, Mode::kLoc);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.1, 1.0);
  if (options.seeding == NtdSeeding::kNndsvd) {
    result.w_key = nndsvd_factor(x_key, dk);
    result.w_loc = nndsvd_factor(x_loc, dl);
    result.core = Tensor3({d.time, dk, dl}, 1.0);
  } else {
    result.w_key = Matrix::NullaryExpr(idx(dk), idx(d.key), [&] { return unit(rng); });
    result.w_loc = Matrix::NullaryExpr(idx(dl), idx(d.loc), [&] { return unit(rng); });
    result.core = Tensor3({d.time, dk, dl});
    for (double& v : result.core.data()) v = unit(rng);
  }
  {
    // Match the overall scale before the first update.
    const Tensor3 fit = expand(result.core, result.w_key, result.w_loc);
    const double s = x.norm() / std::max(fit.norm(), 1e-300);
    result.core *= s;
  }

  for (int it = 0; it < options.iterations; ++it) {
    hals_core(result.core, x, result.w_key, result.w_loc);
    hals_factor(result.w_key, latent_unfolding(result.core, result.w_key, result.w_loc, Mode::kKey), x_key);
    hals_factor(result.w_loc, latent_unfolding(result.core, result.w_key, result.w_loc, Mode::kLoc), x_loc);
    result.errors.push_back((x - expand(result.core, result.w_key, result.w_loc)).norm());
  }
  peel_rows(result.w_key, result.core, Mode::kKey);
  peel_rows(result.w_loc, result.core, Mode::kLoc);
  return result;
}

Matrix update_trend_factor(const Tensor3& target, const Tensor3& core, const Matrix& w_key,
                           const Matrix& w_loc, Mode mode) {
  if (mode == Mode::kTime) {
    throw DimensionError("trend factors exist only for the keyword and location modes");
  }
  if (target.dims().time != core.dims().time) {
    throw DimensionError("trend update: target and core lengths differ");
  }
  const Matrix g = latent_unfolding(core, w_key, w_loc, mode);
  const Matrix& w = mode == Mode::kKey ? w_key : w_loc;
  return multiplicative_step(w, g, unfold(target, mode));
}

void normalize_gauge(TrendParams& params) {
  for (Index i = 0; i < params.w_key.rows(); ++i) {
    const double scale = params.w_key.row(i).maxCoeff();
    if (scale > 0.0 && std::isfinite(scale)) {
      params.w_key.row(i) /= scale;
      params.rd.initial.row(i) *= scale;
    }
  }
}

}  // namespace rdstream
