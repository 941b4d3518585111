#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "rdstream/estimator.hpp"
#include "rdstream/mdl.hpp"
#include "rdstream/model.hpp"

namespace rdstream {

struct RankRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  bool contains(std::size_t v) const noexcept { return v >= lo && v <= hi; }
};

/// Inclusive search ranges for (d_k, d_l, d_s).
struct RankGrid {
  RankRange dk{2, 4};
  RankRange dl{2, 4};
  RankRange ds{0, 4};

  bool contains(const Ranks& r) const noexcept {
    return dk.contains(r.dk) && dl.contains(r.dl) && ds.contains(r.ds);
  }
  /// Every triple of the grid in lexicographic order.
  std::vector<Ranks> enumerate() const;
};

struct StreamConfig {
  std::size_t window = 104;   // L_c
  std::size_t horizon = 13;   // L_f
  std::size_t period = 52;
  RankGrid grid{};
  std::size_t refit_stride = 1;
  EstimatorOptions estimator{};

  /// Throws ConfigError on L_c < 2 * period, L_f == 0, an empty grid, etc.
  void validate() const;
  /// Estimator options with the stream's period applied.
  EstimatorOptions estimator_options() const;
};

struct CandidateScore {
  Ranks ranks;
  CostBreakdown cost;
  bool failed = false;
};

struct InitResult {
  ModelParams model;
  Ranks ranks;
  CostBreakdown cost;
  std::vector<CandidateScore> scores;
};

/// Grid search over every rank triple; the triple with the smallest total
/// description length wins (ties go to the lexicographically first).
InitResult initialize(const Tensor3& first_window, const StreamConfig& config);

/// Re-anchors a model on a later window: the seasonal pattern is shifted by
/// the elapsed steps, w0 is refitted with A, D and the factors frozen, and the
/// outliers and encoding are recomputed for the new window.
ModelParams refresh_model(const ModelParams& model, const Tensor3& window, std::size_t window_start,
                          std::size_t stream_length);

struct RankUpdateResult {
  Ranks ranks;
  std::optional<ModelParams> model;  // set when a neighbour won
  double cost = 0.0;
  int evaluated = 0;
};

/// Evaluates the six one-step neighbours of `ranks` (clipped to the grid) on
/// `window` and adopts the cheapest one that is strictly below `current_cost`.
/// Costs include the model bits of `history`.
RankUpdateResult rank_update(const Tensor3& window, const Ranks& ranks, double current_cost,
                             const FullParamSet& history, std::size_t window_start,
                             std::size_t stream_length, const StreamConfig& config);

struct UpdateDecision {
  bool switched = false;
  bool rank_update_ran = false;
  bool ranks_changed = false;
  CostBreakdown keep_cost;
  std::optional<CostBreakdown> switch_cost;
  double total_bits = 0.0;  // min of the alternatives
};

/// Refreshes the active model on `window`, then appends `candidate` if that
/// lowers the total description length, in which case the ranks are revised
/// by rank_update. `now` is the stream time t_c of the decision.
UpdateDecision model_update(const Tensor3& window, FullParamSet& models,
                            std::optional<ModelParams> candidate, Ranks& ranks, std::size_t now,
                            const StreamConfig& config);

struct ForecastResult {
  Tensor3 values;    // (L_f, k, l)
  Tensor3 trend;
  Tensor3 seasonal;
  std::vector<std::size_t> provenance;  // model index per forecast step
  bool trend_fallback = false;
};

/// Extends the active model L_f steps past its window.
ForecastResult forecast(const FullParamSet& models, std::size_t horizon);

struct ForecastRecord {
  std::size_t origin = 0;  // t_c; step h targets stream index origin + h - 1
  ForecastResult result;
};

using Cell = std::array<std::size_t, 3>;  // (t, keyword, location)

struct StepRecord {
  std::size_t now = 0;
  bool estimated = false;
  bool estimation_failed = false;
  UpdateDecision decision;
  Ranks ranks;
  double seconds = 0.0;
  std::vector<Cell> outliers;      // active model outliers, stream coordinates
  std::vector<double> last_fit;    // active reconstruction at stream index now - 1
};

struct StreamResult {
  InitResult init;
  FullParamSet models;
  Ranks ranks;
  std::vector<ForecastRecord> forecasts;
  std::vector<StepRecord> steps;
  std::size_t stream_length = 0;

  /// Activation times of every model after the first.
  std::vector<std::size_t> switch_times() const;
};

using StepObserver = std::function<void(const StepRecord&)>;

/// Initializes on the first L_c slices, then for every t_c in (L_c, n]
/// estimates a candidate on the window [t_c - L_c, t_c) every refit_stride
/// steps, runs model_update and logs an L_f-step forecast.
StreamResult run_stream(const Tensor3& stream, const StreamConfig& config,
                        const StepObserver& observer = {});

}  // namespace rdstream
