#include "rdstream/seasonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::size_t trend_span(std::size_t period) {
  auto span = static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(period)));
  if (span % 2 == 0) ++span;
  return std::max<std::size_t>(span, 3);
}

// Degree-1 loess with tricube weights over the `span` nearest points,
// following the neighbourhood rules of the original STL Fortran routine.
std::vector<double> loess(std::span<const double> y, std::size_t span) {
  const std::size_t n = y.size();
  std::vector<double> out(n);
  const std::size_t q = std::min(span, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t left = i >= q / 2 ? i - q / 2 : 0;
    if (left + q > n) left = n - q;
    const std::size_t right = left + q - 1;
    double h = static_cast<double>(std::max(i - left, right - i));
    if (span > n) h += static_cast<double>((span - n) / 2);
    const double h9 = 0.999 * h;
    const double h1 = 0.001 * h;

    double wsum = 0.0, xbar = 0.0;
    std::vector<double> w(q, 0.0);
    for (std::size_t j = left; j <= right; ++j) {
      const double r = std::abs(static_cast<double>(j) - static_cast<double>(i));
      double wj = 0.0;
      if (r <= h9) {
        if (r <= h1) {
          wj = 1.0;
        } else {
          const double c = r / h;
          const double one_minus = 1.0 - c * c * c;
          wj = one_minus * one_minus * one_minus;
        }
      }
      w[j - left] = wj;
      wsum += wj;
      xbar += wj * static_cast<double>(j);
    }
    if (wsum <= 0.0) {
      out[i] = y[i];
      continue;
    }
    xbar /= wsum;
    double sxx = 0.0;
    for (std::size_t j = left; j <= right; ++j) {
      const double dx = static_cast<double>(j) - xbar;
      sxx += w[j - left] * dx * dx;
    }
    // Local linear fit evaluated at i, expressed as a weighted sum of y.
    const double range = static_cast<double>(n - 1);
    const bool linear = std::sqrt(sxx) > 0.001 * range;
    const double slope_arm = static_cast<double>(i) - xbar;
    double fit = 0.0;
    for (std::size_t j = left; j <= right; ++j) {
      double wj = w[j - left] / wsum;
      if (linear) wj *= 1.0 + slope_arm * (static_cast<double>(j) - xbar) * wsum / sxx;
      fit += wj * y[j];
    }
    out[i] = fit;
  }
  return out;
}

void check_rank(const Dims& dims, std::size_t rank) {
  if (rank > dims.time || rank > dims.key || rank > dims.loc) {
    throw DimensionError("seasonal rank " + std::to_string(rank) +
                         " exceeds a tensor extent; reduce the rank");
  }
}

// Rows of `gram`'s top eigenvectors, `rank` x n.
Matrix leading_rows(const Matrix& unfolded, std::size_t rank) {
  const Matrix gram = unfolded * unfolded.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Matrix& vectors = eig.eigenvectors();  // ascending eigenvalues
  Matrix out(idx(rank), gram.rows());
  for (std::size_t r = 0; r < rank; ++r) {
    Vector v = vectors.col(gram.cols() - 1 - idx(r));
    // Sign convention: largest-magnitude entry positive.
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.row(idx(r)) = v.transpose();
  }
  return out;
}

// X_(mode) times the Khatri-Rao product of the other two factors, I x R,
// computed without materializing the unfolding.
Matrix mttkrp(const Tensor3& x, const SeasonalParams& p, Mode mode) {
  const Dims& d = x.dims();
  const Index rank = idx(p.rank());
  Matrix out = Matrix::Zero(idx(d.extent(mode)), rank);
  for (std::size_t t = 0; t < d.time; ++t) {
    for (std::size_t u = 0; u < d.key; ++u) {
      for (std::size_t v = 0; v < d.loc; ++v) {
        const double value = x(t, u, v);
        if (value == 0.0) continue;
        for (Index r = 0; r < rank; ++r) {
          switch (mode) {
            case Mode::kTime:
              out(idx(t), r) += value * p.s_key(r, idx(u)) * p.s_loc(r, idx(v));
              break;
            case Mode::kKey:
              out(idx(u), r) += value * p.s_time(r, idx(t)) * p.s_loc(r, idx(v));
              break;
            case Mode::kLoc:
              out(idx(v), r) += value * p.s_time(r, idx(t)) * p.s_key(r, idx(u));
              break;
          }
        }
      }
    }
  }
  return out;
}

Matrix& factor_of(SeasonalParams& p, Mode mode) {
  switch (mode) {
    case Mode::kTime: return p.s_time;
    case Mode::kKey: return p.s_key;
    case Mode::kLoc: return p.s_loc;
  }
  return p.s_time;
}

// Pushes the scale of the key and loc rows into the time rows.
void normalize(SeasonalParams& p) {
  for (Index r = 0; r < p.s_key.rows(); ++r) {
    const double nk = p.s_key.row(r).norm();
    const double nl = p.s_loc.row(r).norm();
    if (nk > 0.0 && nl > 0.0) {
      p.s_key.row(r) /= nk;
      p.s_loc.row(r) /= nl;
      p.s_time.row(r) *= nk * nl;
    }
  }
}

}  // namespace

SeasonalParams SeasonalParams::zero(std::size_t length, std::size_t keys, std::size_t locs,
                                    std::size_t period) {
  return SeasonalParams{Matrix(0, idx(length)), Matrix(0, idx(keys)), Matrix(0, idx(locs)),
                        period};
}

StlResult stl_decompose(std::span<const double> series, std::size_t period,
                        const StlOptions& options) {
  if (period < 2) throw InitializationError("seasonal period must be >= 2");
  const std::size_t n = series.size();
  if (n < 2 * period) {
    throw InitializationError("series of length " + std::to_string(n) +
                              " is shorter than two seasonal periods (" +
                              std::to_string(2 * period) + "); use a larger window L_c");
  }
  const std::size_t span = trend_span(period);

  StlResult result;
  result.trend.assign(n, 0.0);
  result.seasonal.assign(n, 0.0);
  std::vector<double> work(n);
  std::vector<double> phase_mean(period);
  for (int pass = 0; pass < std::max(1, options.inner_iterations); ++pass) {
    // Cycle-subseries smoothing with a periodic window reduces to phase means;
    // the low-pass of an exactly periodic sequence is its cycle mean.
    std::fill(phase_mean.begin(), phase_mean.end(), 0.0);
    std::vector<std::size_t> counts(period, 0);
    for (std::size_t t = 0; t < n; ++t) {
      phase_mean[t % period] += series[t] - result.trend[t];
      ++counts[t % period];
    }
    double cycle_mean = 0.0;
    for (std::size_t p = 0; p < period; ++p) {
      phase_mean[p] /= static_cast<double>(counts[p]);
      cycle_mean += phase_mean[p];
    }
    cycle_mean /= static_cast<double>(period);
    for (std::size_t t = 0; t < n; ++t) {
      result.seasonal[t] = phase_mean[t % period] - cycle_mean;
      work[t] = series[t] - result.seasonal[t];
    }
    result.trend = loess(work, span);
  }
  result.residual.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    result.residual[t] = series[t] - result.trend[t] - result.seasonal[t];
  }
  return result;
}

StlSplit stl_split(const Tensor3& window, std::size_t period, const StlOptions& options) {
  const Dims& d = window.dims();
  StlSplit split{Tensor3(d), Tensor3(d)};
  std::vector<double> fiber(d.time);
  for (std::size_t u = 0; u < d.key; ++u) {
    for (std::size_t v = 0; v < d.loc; ++v) {
      for (std::size_t t = 0; t < d.time; ++t) fiber[t] = window(t, u, v);
      const StlResult r = stl_decompose(fiber, period, options);
      for (std::size_t t = 0; t < d.time; ++t) {
        split.trend(t, u, v) = r.trend[t];
        split.seasonal(t, u, v) = r.seasonal[t];
      }
    }
  }
  return split;
}

Matrix pseudo_inverse(const Matrix& m) {
  if (m.size() == 0) return Matrix(m.cols(), m.rows());
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = std::numeric_limits<double>::epsilon() *
                        static_cast<double>(std::max(m.rows(), m.cols())) *
                        (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

SeasonalParams update_seasonal_factor(const Tensor3& target, const SeasonalParams& params,
                                      Mode mode) {
  SeasonalParams out = params;
  if (params.rank() == 0) return out;
  if (target.dims() != Dims{params.length(), static_cast<std::size_t>(params.s_key.cols()),
                            static_cast<std::size_t>(params.s_loc.cols())}) {
    throw DimensionError("seasonal update: target shape does not match the factors");
  }
  Matrix gram = Matrix::Ones(params.s_time.rows(), params.s_time.rows());
  for (Mode other : {Mode::kTime, Mode::kKey, Mode::kLoc}) {
    if (other == mode) continue;
    const Matrix& f = factor_of(out, other);
    gram = gram.cwiseProduct(f * f.transpose());
  }
  const Matrix m = mttkrp(target, params, mode);
  factor_of(out, mode) = (m * pseudo_inverse(gram)).transpose();
  return out;
}

Tensor3 reconstruct_seasonal(const SeasonalParams& p) {
  const Dims d{p.length(), static_cast<std::size_t>(p.s_key.cols()),
               static_cast<std::size_t>(p.s_loc.cols())};
  Tensor3 out(d);
  const Index rank = idx(p.rank());
  for (Index r = 0; r < rank; ++r) {
    for (std::size_t t = 0; t < d.time; ++t) {
      const double st = p.s_time(r, idx(t));
      if (st == 0.0) continue;
      auto slice = out.slice(t);
      for (std::size_t u = 0; u < d.key; ++u) {
        const double su = st * p.s_key(r, idx(u));
        for (std::size_t v = 0; v < d.loc; ++v) slice[u * d.loc + v] += su * p.s_loc(r, idx(v));
      }
    }
  }
  return out;
}

SeasonalParams advance_seasonal(const SeasonalParams& params, std::size_t steps) {
  SeasonalParams out = params;
  const std::size_t length = params.length();
  if (params.rank() == 0 || steps == 0) return out;
  if (params.period == 0 || params.period > length) {
    throw DimensionError("seasonal period must be in [1, L_c] to extend the pattern");
  }
  const std::size_t base = length - params.period;
  for (std::size_t tau = 0; tau < length; ++tau) {
    const std::size_t source = tau + steps;
    const std::size_t col =
        source < length ? source : base + (source - length) % params.period;
    out.s_time.col(idx(tau)) = params.s_time.col(idx(col));
  }
  return out;
}

Tensor3 extend_seasonal(const SeasonalParams& params, std::size_t horizon) {
  if (horizon == 0) throw DimensionError("forecast horizon must be >= 1");
  const auto keys = static_cast<std::size_t>(params.s_key.cols());
  const auto locs = static_cast<std::size_t>(params.s_loc.cols());
  if (params.rank() == 0) return Tensor3({horizon, keys, locs});
  if (params.period == 0 || params.period > params.length()) {
    throw DimensionError("seasonal period must be in [1, L_c] to extend the pattern");
  }
  SeasonalParams tiled = params;
  tiled.s_time.resize(params.s_time.rows(), idx(horizon));
  const std::size_t base = params.length() - params.period;
  for (std::size_t h = 0; h < horizon; ++h) {
    tiled.s_time.col(idx(h)) = params.s_time.col(idx(base + h % params.period));
  }
  return reconstruct_seasonal(tiled);
}

CpAlsResult cp_als(const Tensor3& tensor, std::size_t rank, std::size_t period,
                   const CpAlsOptions& options) {
  if (rank == 0) throw DimensionError("CP rank must be >= 1");
  check_rank(tensor.dims(), rank);
  CpAlsResult result;
  SeasonalParams& p = result.params;
  p.period = period;
  p.s_time = leading_rows(unfold(tensor, Mode::kTime), rank);
  p.s_key = leading_rows(unfold(tensor, Mode::kKey), rank);
  p.s_loc = leading_rows(unfold(tensor, Mode::kLoc), rank);

  const double scale = std::max(tensor.norm(), std::numeric_limits<double>::min());
  double previous = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    for (Mode mode : {Mode::kTime, Mode::kKey, Mode::kLoc}) {
      p = update_seasonal_factor(tensor, p, mode);
    }
    normalize(p);
    const double error = (tensor - reconstruct_seasonal(p)).norm();
    result.errors.push_back(error);
    if (error <= 1e-14 * scale) break;
    if (std::isfinite(previous) && std::abs(previous - error) <= options.tolerance * previous) {
      break;
    }
    previous = error;
  }
  return result;
}

Matrix periodic_projection(const Matrix& s_time, std::size_t period) {
  if (period == 0) throw DimensionError("seasonal period must be >= 1");
  const Index n = s_time.cols();
  const Index p = idx(period);
  Matrix out(s_time.rows(), n);
  for (Index r = 0; r < s_time.rows(); ++r) {
    Vector sum = Vector::Zero(p);
    Vector count = Vector::Zero(p);
    for (Index t = 0; t < n; ++t) {
      sum(t % p) += s_time(r, t);
      count(t % p) += 1.0;
    }
    for (Index t = 0; t < n; ++t) out(r, t) = sum(t % p) / count(t % p);
    if (n > 0) out.row(r).array() -= out.row(r).mean();
  }
  return out;
}

}  // namespace rdstream
