#pragma once

#include <cstddef>
#include <span>

#include "rdstream/model.hpp"
#include "rdstream/tensor.hpp"

namespace rdstream {

/// Bits per stored floating point value.
inline constexpr double kFloatBits = 32.0;
inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kQuantizationStep = 1e-4;

struct CostBreakdown {
  double model_bits = 0.0;
  double coding_bits = 0.0;
  double total_bits = 0.0;
};

/// Universal code length of a nonnegative integer: log2(2.865064) plus the
/// positive terms of the iterated log2. log_star(0) is one flag bit.
double log_star(std::size_t n);

/// nnz * (index_bits + c_F) + log_star(nnz).
double structure_cost(std::size_t nonzeros, double index_bits);

/// Per-structure description lengths of one model.
struct ModelCostTerms {
  double w_key = 0.0;
  double w_loc = 0.0;
  double growth = 0.0;
  double diffusion = 0.0;
  double s_time = 0.0;
  double s_key = 0.0;
  double s_loc = 0.0;
  double outliers = 0.0;

  double sum() const {
    return w_key + w_loc + growth + diffusion + s_time + s_key + s_loc + outliers;
  }
};

ModelCostTerms model_cost_terms(const ModelParams& model);
double model_cost(const ModelParams& model);

/// Index bits plus c_F for one stored outlier in a k x l stream of length n.
double outlier_entry_bits(std::size_t stream_length, std::size_t keys, std::size_t locs);

/// Maximum-likelihood Gaussian of the residual, skipping entries where
/// `exclude` is nonzero (pass an empty tensor to use every entry). Sigma is
/// floored at kSigmaFloor.
EncodingModel fit_encoding(const Tensor3& residual, const Tensor3& exclude,
                           double quantization_step = kQuantizationStep);

/// max(0, -log2(q * pdf(r))) under the encoding model.
double element_bits(double residual, const EncodingModel& enc);

double coding_cost(const Tensor3& residual, const EncodingModel& enc);

/// Model bits of every entry of `models` plus the coding bits of `window`
/// under the active model, whose window must have the same shape.
CostBreakdown total_cost(const Tensor3& window, const FullParamSet& models);

/// Keeps residual entries in the outlier tensor exactly when storing them
/// lowers the description length. Entries are ranked by coding-bit saving and
/// the kept prefix maximizes saving - count * entry_bits - log_star(count),
/// which makes the result stable under any single add or remove.
Tensor3 sparsify_outliers(const Tensor3& residual, std::size_t stream_length,
                          const EncodingModel& enc);

}  // namespace rdstream
