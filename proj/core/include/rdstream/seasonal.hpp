#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rdstream/tensor.hpp"

namespace rdstream {

/// CP factors of the seasonal tensor. Each matrix has one row per seasonal
/// pattern (rank d_s); d_s may be zero, in which case the matrices have no rows
/// and the reconstruction is identically zero.
struct SeasonalParams {
  Matrix s_time;  // d_s x L_c
  Matrix s_key;   // d_s x k
  Matrix s_loc;   // d_s x l
  std::size_t period = 0;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(s_time.rows()); }
  std::size_t length() const noexcept { return static_cast<std::size_t>(s_time.cols()); }

  static SeasonalParams zero(std::size_t length, std::size_t keys, std::size_t locs,
                             std::size_t period);
};

struct StlResult {
  std::vector<double> trend;
  std::vector<double> seasonal;
  std::vector<double> residual;
};

struct StlOptions {
  int inner_iterations = 2;
};

/// Seasonal-trend decomposition by loess with a periodic seasonal window.
///
/// The cycle-subseries smoother is the per-phase mean, so the seasonal
/// component is exactly periodic with zero mean over every full cycle. The
/// trend is a degree-1 tricube loess whose span is the smallest odd integer
/// >= 1.5 * period. Throws InitializationError when the series is shorter than
/// two periods or the period is below 2.
StlResult stl_decompose(std::span<const double> series, std::size_t period,
                        const StlOptions& options = {});

/// Trend and seasonal splits of every (keyword, location) fiber.
struct StlSplit {
  Tensor3 trend;
  Tensor3 seasonal;
};
StlSplit stl_split(const Tensor3& window, std::size_t period, const StlOptions& options = {});

struct CpAlsOptions {
  int max_sweeps = 50;
  double tolerance = 1e-6;
};

struct CpAlsResult {
  SeasonalParams params;
  /// Frobenius reconstruction error after each completed sweep.
  std::vector<double> errors;
};

/// Rank-`rank` CP decomposition by alternating least squares. Factors are
/// seeded from the leading eigenvectors of each mode's Gram matrix, so the
/// result is deterministic. Throws DimensionError if the rank exceeds any
/// tensor extent.
CpAlsResult cp_als(const Tensor3& tensor, std::size_t rank, std::size_t period,
                   const CpAlsOptions& options = {});

/// One least-squares update of the `mode` factor against `target`:
/// S = X_(mode) U (V)^+, U the Khatri-Rao product of the other two factors and
/// V the Hadamard product of their Gram matrices.
SeasonalParams update_seasonal_factor(const Tensor3& target, const SeasonalParams& params,
                                      Mode mode);

/// Dense seasonal tensor (L_c x k x l).
Tensor3 reconstruct_seasonal(const SeasonalParams& params);

/// Seasonal forecast of `horizon` slices following the window, tiling the last
/// full period of s_time.
Tensor3 extend_seasonal(const SeasonalParams& params, std::size_t horizon);

/// Re-indexes s_time for a window that has slid forward by `steps` samples.
/// Columns that fall beyond the old window continue the last period.
SeasonalParams advance_seasonal(const SeasonalParams& params, std::size_t steps);

/// Moore-Penrose pseudoinverse via SVD with the usual relative cutoff.
Matrix pseudo_inverse(const Matrix& m);

/// Orthogonal projection of every row of `s_time` onto sequences that repeat
/// with `period` and sum to zero: each phase is replaced by its mean over the
/// cycles, then the overall mean is removed. When the length is a multiple of
/// the period every full cycle has zero mean.
Matrix periodic_projection(const Matrix& s_time, std::size_t period);

}  // namespace rdstream
