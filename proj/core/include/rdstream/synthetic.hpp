#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rdstream/model.hpp"
#include "rdstream/stream_engine.hpp"
#include "rdstream/tensor.hpp"

namespace rdstream {

/// Parameters of a generated stream. Keywords and locations are split into
/// contiguous groups, one per latent rank, with nonnegative loadings.
struct SyntheticSpec {
  std::size_t length = 300;
  std::size_t keys = 6;
  std::size_t locs = 8;
  std::size_t period = 52;
  Ranks ranks{2, 2, 1};
  double growth = 0.0025;         // magnitude of the latent growth rates
  double diffusion = 0.02;        // strength of the single diffusion link
  double seasonal_amplitude = 0.1;
  double noise = 0.005;
  std::size_t spikes = 5;
  double spike_height = 0.6;
  /// Stream index at which the sign of A(0, 0) flips.
  std::optional<std::size_t> shift_at = 180;
  std::uint64_t seed = 1;
};

struct SyntheticStream {
  Tensor3 stream;  // min-max normalized to [0, 1]
  Tensor3 clean;   // same scaling, without noise and spikes
  Tensor3 trend_part;     // clean = trend_part + seasonal_part
  Tensor3 seasonal_part;
  TrendParams trend;  // generating trend before the shift
  RDParams shifted;   // dynamics after the shift
  std::vector<Cell> spikes;
};

SyntheticStream make_synthetic(const SyntheticSpec& spec);

}  // namespace rdstream
