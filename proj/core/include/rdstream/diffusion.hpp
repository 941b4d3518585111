#pragma once

#include <cstddef>
#include <vector>

#include "rdstream/tensor.hpp"

namespace rdstream {

/// Diffusion strengths d(i, j, j'): flow from latent location group j' into j
/// for latent keyword group i. Entries are nonnegative and the diagonal
/// d(i, j, j) is held at zero since it cancels in the dynamics.
class DiffusionTensor {
 public:
  DiffusionTensor() = default;
  DiffusionTensor(std::size_t dk, std::size_t dl) : dk_(dk), dl_(dl), data_(dk * dl * dl, 0.0) {}

  std::size_t dk() const noexcept { return dk_; }
  std::size_t dl() const noexcept { return dl_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t jp) {
    return data_[(i * dl_ + j) * dl_ + jp];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t jp) const {
    return data_[(i * dl_ + j) * dl_ + jp];
  }

  const std::vector<double>& values() const noexcept { return data_; }
  std::size_t count_nonzero() const noexcept;
  double max() const noexcept;

  friend bool operator==(const DiffusionTensor&, const DiffusionTensor&) = default;

 private:
  std::size_t dk_ = 0;
  std::size_t dl_ = 0;
  std::vector<double> data_;
};

struct RDParams {
  Matrix growth;            // A, d_k x d_l, any sign
  DiffusionTensor diffusion;  // d_k x d_l x d_l, >= 0, zero diagonal
  Matrix initial;           // w0, d_k x d_l, >= 0

  std::size_t dk() const noexcept { return static_cast<std::size_t>(growth.rows()); }
  std::size_t dl() const noexcept { return static_cast<std::size_t>(growth.cols()); }

  static RDParams zero(std::size_t dk, std::size_t dl);

  /// Throws DimensionError or std::invalid_argument when an invariant is broken.
  void validate() const;
};

/// Latent trajectory, one (d_k x d_l) state per time slice.
struct Trajectory {
  Tensor3 core;  // (L, d_k, d_l)

  Matrix state(std::size_t t) const;
};

/// dW_ij = a_ij w_ij + sum_j' d_ijj' (w_ij' - w_ij)
Matrix rd_derivative(const Matrix& state, const RDParams& params);

/// Magnitude beyond which integration is declared divergent.
inline constexpr double kDivergenceLimit = 1e12;

/// L-long trajectory starting at w0, advanced with classical RK4 at one step
/// per data sample. Throws DivergenceError carrying the first bad step.
Trajectory generate(const RDParams& params, std::size_t length);

/// Which parameter blocks the fit may move.
struct LmOptions {
  bool fit_rates = true;    // A and the off-diagonal diffusion entries
  bool fit_initial = true;  // w0
  int max_iterations = 100;
  double initial_damping = 1e-3;
  double tolerance = 1e-6;
  double fd_step = 1e-6;
};

struct LmResult {
  RDParams params;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  int iterations = 0;
  /// True when no step reduced the residual; params are then the input.
  bool no_progress = false;
};

/// Levenberg-Marquardt fit of the reaction-diffusion parameters so that
/// expand(generate(params, L), w_key, w_loc) matches `target` in the
/// Frobenius norm. The residual is evaluated in observed space; diffusion and
/// w0 are projected onto [0, inf) after each step and a step whose projection
/// does not lower the residual is rejected.
LmResult fit_lm(const Tensor3& target, const Matrix& w_key, const Matrix& w_loc,
                const RDParams& init, const LmOptions& options = {});

/// Core-space variant (identity factors).
LmResult fit_lm(const Tensor3& core_target, const RDParams& init, const LmOptions& options = {});

/// Number of free scalars under `options` (A, off-diagonal D, w0).
std::size_t parameter_count(std::size_t dk, std::size_t dl, const LmOptions& options = {});

/// Forward-difference Jacobian of vec(generate(params, L).core) with respect
/// to the packed free parameters, relative step `step * (1 + |p|)`.
Matrix fd_jacobian(const RDParams& params, std::size_t length, double step,
                   const LmOptions& options = {});

}  // namespace rdstream
