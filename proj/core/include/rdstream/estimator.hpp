#pragma once

#include <cstddef>
#include <vector>

#include "rdstream/diffusion.hpp"
#include "rdstream/mdl.hpp"
#include "rdstream/model.hpp"
#include "rdstream/seasonal.hpp"
#include "rdstream/trend_factors.hpp"

namespace rdstream {

struct EstimatorOptions {
  std::size_t period = 52;
  int max_outer_iterations = 20;
  /// Stop once the fit error improves by less than this fraction.
  double tolerance = 1e-4;
  /// LM budget for the first trend fit and for the refits that follow it.
  int first_lm_iterations = 100;
  int lm_iterations = 20;
  double quantization_step = kQuantizationStep;
  /// Keep the seasonal time factor periodic with zero mean. The time update
  /// is then the constrained least-squares solution, so the descent holds.
  bool periodic_seasonal = true;
  NtdOptions ntd{};
  CpAlsOptions cp{};
  StlOptions stl{};
};

struct EstimationResult {
  ModelParams model;
  /// ||X - trend - seasonal - outliers|| after initialization and after every
  /// accepted outer iteration; nonincreasing.
  std::vector<double> error_history;
  int outer_iterations = 0;
  /// Some trend refit made no progress.
  bool lm_no_progress = false;
  /// A trend refit diverged and the best earlier state was kept.
  bool diverged = false;
};

/// Fits one window by alternating updates: the reaction-diffusion parameters
/// (Levenberg-Marquardt), the nonnegative trend factors, the seasonal CP
/// factors (time, key, loc) and finally the MDL-sparsified outlier tensor.
/// Each block update is kept only if it does not raise the fit error; an outer
/// iteration whose outlier refresh would raise it ends the loop and is undone.
///
/// `window_start` and `stream_length` locate the window in the stream; the
/// latter sets the index cost of stored outliers. Throws InitializationError
/// when d_s > 0 and the window is shorter than two periods, DimensionError
/// when a rank exceeds its mode size.
EstimationResult model_estimation(const Tensor3& window, const Ranks& ranks,
                                  std::size_t window_start, std::size_t stream_length,
                                  const EstimatorOptions& options = {});

/// Initial reaction-diffusion state for a latent trajectory: w0 from the first
/// slice, growth rates from per-entry log-linear slopes, no diffusion.
RDParams initial_dynamics(const Tensor3& core);

}  // namespace rdstream
