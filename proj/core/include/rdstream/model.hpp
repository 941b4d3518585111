#pragma once

#include <cstddef>
#include <vector>

#include "rdstream/seasonal.hpp"
#include "rdstream/tensor.hpp"
#include "rdstream/trend_factors.hpp"

namespace rdstream {

struct Ranks {
  std::size_t dk = 2;
  std::size_t dl = 2;
  std::size_t ds = 1;

  friend bool operator==(const Ranks&, const Ranks&) = default;
  friend auto operator<=>(const Ranks&, const Ranks&) = default;
};

/// Gaussian model of the coding residual with a fixed quantization step.
struct EncodingModel {
  double mu = 0.0;
  double sigma = 1.0;
  double quantization_step = 1e-4;
};

/// One window model: trend, seasonal and outlier components plus the
/// metadata its description length depends on.
struct ModelParams {
  Ranks ranks;
  TrendParams trend;
  SeasonalParams seasonal;
  Tensor3 outliers;  // dense storage, mostly exact zeros
  EncodingModel encoding;
  std::size_t window_start = 0;  // stream index of the window's first slice
  std::size_t window_length = 0;
  std::size_t stream_length = 0;  // samples observed when the model was scored

  std::size_t keys() const noexcept { return static_cast<std::size_t>(trend.w_key.cols()); }
  std::size_t locations() const noexcept { return static_cast<std::size_t>(trend.w_loc.cols()); }
  /// One past the last stream index covered by the window.
  std::size_t window_end() const noexcept { return window_start + window_length; }
};

struct ModelEntry {
  ModelParams model;
  std::size_t activated_at = 0;
};

/// Ordered sequence of window models. The active model is the one used for
/// coding and forecasting; the others only contribute model bits.
struct FullParamSet {
  std::vector<ModelEntry> models;
  std::size_t active = 0;

  bool empty() const noexcept { return models.empty(); }
  const ModelParams& active_model() const;
  ModelParams& active_model();
};

struct Reconstruction {
  Tensor3 trend;
  Tensor3 seasonal;
  Tensor3 outliers;

  Tensor3 total() const { return trend + seasonal + outliers; }
};

/// Component tensors of a model over its own window.
Reconstruction reconstruct(const ModelParams& model);

}  // namespace rdstream
