#pragma once

#include <cstdint>
#include <vector>

#include "rdstream/diffusion.hpp"
#include "rdstream/tensor.hpp"

namespace rdstream {

/// Floor applied inside the multiplicative updates and to factor entries.
inline constexpr double kFactorEpsilon = 1e-12;

struct TrendParams {
  Matrix w_key;  // d_k x k, >= 0
  Matrix w_loc;  // d_l x l, >= 0
  RDParams rd;
};

/// Trend tensor of the given length: expand(generate(rd, L), w_key, w_loc).
Tensor3 reconstruct_trend(const TrendParams& params, std::size_t length);

/// Starting point of the NTD factors: NNDSVD of the mode unfoldings, or
/// seeded uniform draws in [0.1, 1).
enum class NtdSeeding { kNndsvd, kRandom };

struct NtdOptions {
  int iterations = 200;
  NtdSeeding seeding = NtdSeeding::kNndsvd;
  std::uint64_t seed = 0x5eedULL;
};

struct NtdResult {
  Matrix w_key;
  Matrix w_loc;
  Tensor3 core;  // (L, d_k, d_l)
  std::vector<double> errors;  // Frobenius error after each iteration
};

/// Nonnegative Tucker decomposition with the time mode left uncompressed,
/// x ~= core x_key w_key x_loc w_loc, fitted by multiplicative updates.
/// Negative input entries are clipped to zero. Throws DimensionError when a
/// rank exceeds its mode size.
NtdResult ntd_init(const Tensor3& trend, std::size_t dk, std::size_t dl,
                   const NtdOptions& options = {});

/// One multiplicative update of the `mode` factor (kKey or kLoc) against a
/// possibly signed target:
///   W <- W * max(eps, G X_(mode)^T) / max(eps, G G^T W)
/// with G = unfold(core x_other W_other, mode). The result is entrywise >= eps.
Matrix update_trend_factor(const Tensor3& target, const Tensor3& core, const Matrix& w_key,
                           const Matrix& w_loc, Mode mode);

/// Rescales every w_key row to unit maximum and pushes the scale into the
/// matching w0 row. The dynamics are linear and only couple entries that share
/// a keyword group, so the reconstruction is unchanged.
void normalize_gauge(TrendParams& params);

}  // namespace rdstream
