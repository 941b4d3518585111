#include "rdstream/stream_engine.hpp"

#include <chrono>
#include <cmath>
#include <string>
#include <utility>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

using Index = Eigen::Index;

std::vector<Cell> outlier_cells(const ModelParams& m) {
  std::vector<Cell> cells;
  if (m.outliers.empty()) return cells;
  const Dims& d = m.outliers.dims();
  for (std::size_t t = 0; t < d.time; ++t)
    for (std::size_t u = 0; u < d.key; ++u)
      for (std::size_t v = 0; v < d.loc; ++v)
        if (m.outliers(t, u, v) != 0.0) cells.push_back({m.window_start + t, u, v});
  return cells;
}

std::vector<Ranks> neighbours(const Ranks& r, const RankGrid& grid) {
  // Lexicographic order on (d_k, d_l, d_s).
  std::vector<Ranks> candidates;
  if (r.dk > 1) candidates.push_back({r.dk - 1, r.dl, r.ds});
  if (r.dl > 1) candidates.push_back({r.dk, r.dl - 1, r.ds});
  if (r.ds > 0) candidates.push_back({r.dk, r.dl, r.ds - 1});
  candidates.push_back({r.dk, r.dl, r.ds + 1});
  candidates.push_back({r.dk, r.dl + 1, r.ds});
  candidates.push_back({r.dk + 1, r.dl, r.ds});
  std::vector<Ranks> out;
  for (const Ranks& c : candidates)
    if (grid.contains(c)) out.push_back(c);
  return out;
}

FullParamSet with_candidate(const FullParamSet& base, ModelParams candidate, std::size_t now) {
  FullParamSet out = base;
  out.models.push_back(ModelEntry{std::move(candidate), now});
  out.active = out.models.size() - 1;
  return out;
}

}  // namespace

std::vector<Ranks> RankGrid::enumerate() const {
  std::vector<Ranks> out;
  for (std::size_t a = dk.lo; a <= dk.hi; ++a)
    for (std::size_t b = dl.lo; b <= dl.hi; ++b)
      for (std::size_t c = ds.lo; c <= ds.hi; ++c) out.push_back({a, b, c});
  return out;
}

void StreamConfig::validate() const {
  if (period < 2) throw ConfigError("period must be >= 2");
  if (window < 2 * period) {
    throw ConfigError("window L_c = " + std::to_string(window) +
                      " must be at least two periods (" + std::to_string(2 * period) + ")");
  }
  if (horizon == 0) throw ConfigError("forecast horizon must be >= 1");
  if (refit_stride == 0) throw ConfigError("refit stride must be >= 1");
  if (grid.dk.lo == 0 || grid.dl.lo == 0) throw ConfigError("d_k and d_l ranges must start at 1 or more");
  if (grid.dk.lo > grid.dk.hi || grid.dl.lo > grid.dl.hi || grid.ds.lo > grid.ds.hi) {
    throw ConfigError("rank grid is empty");
  }
}

EstimatorOptions StreamConfig::estimator_options() const {
  EstimatorOptions out = estimator;
  out.period = period;
  return out;
}

std::vector<std::size_t> StreamResult::switch_times() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < models.models.size(); ++i) out.push_back(models.models[i].activated_at);
  return out;
}

InitResult initialize(const Tensor3& first_window, const StreamConfig& config) {
  config.validate();
  if (first_window.dims().time != config.window) {
    throw InitializationError("initial window must hold exactly L_c = " +
                              std::to_string(config.window) + " slices");
  }
  const EstimatorOptions options = config.estimator_options();
  InitResult result;
  bool found = false;
  for (const Ranks& ranks : config.grid.enumerate()) {
    CandidateScore score{ranks, {}, false};
    try {
      EstimationResult est = model_estimation(first_window, ranks, 0, config.window, options);
      FullParamSet single;
      single.models.push_back(ModelEntry{est.model, config.window});
      score.cost = total_cost(first_window, single);
      if (!std::isfinite(score.cost.total_bits)) {
        score.failed = true;
      } else if (!found || score.cost.total_bits < result.cost.total_bits) {
        found = true;
        result.model = std::move(est.model);
        result.ranks = ranks;
        result.cost = score.cost;
      }
    } catch (const Error&) {
      score.failed = true;
    }
    result.scores.push_back(score);
  }
  if (!found) throw InitializationError("every rank candidate failed during initialization");
  return result;
}

ModelParams refresh_model(const ModelParams& model, const Tensor3& window, std::size_t window_start,
                          std::size_t stream_length) {
  if (window.dims() != Dims{model.window_length, model.keys(), model.locations()}) {
    throw DimensionError("refresh window shape does not match the model");
  }
  if (window_start < model.window_start) {
    throw DimensionError("a model can only be moved forward in the stream");
  }
  const std::size_t steps = window_start - model.window_start;
  const std::size_t length = model.window_length;

  ModelParams out = model;
  out.seasonal = advance_seasonal(model.seasonal, steps);
  out.window_start = window_start;
  out.stream_length = std::max(stream_length, window_start + length);

  // Start w0 from the old dynamics advanced to the new window start.
  try {
    const Trajectory ahead = generate(model.trend.rd, steps + 1);
    Matrix w0 = ahead.state(steps).cwiseMax(0.0);
    out.trend.rd.initial = std::move(w0);
  } catch (const DivergenceError&) {
  }

  const Tensor3 xs = reconstruct_seasonal(out.seasonal);
  LmOptions lm;
  lm.fit_rates = false;
  Tensor3 outliers(window.dims());
  for (int pass = 0; pass < 2; ++pass) {
    Tensor3 target = window;
    target -= xs;
    target -= outliers;
    out.trend.rd = fit_lm(target, out.trend.w_key, out.trend.w_loc, out.trend.rd, lm).params;
    Tensor3 residual = window;
    residual -= reconstruct_trend(out.trend, length);
    residual -= xs;
    out.encoding = fit_encoding(residual, outliers, model.encoding.quantization_step);
    outliers = sparsify_outliers(residual, out.stream_length, out.encoding);
  }
  out.outliers = std::move(outliers);
  return out;
}

RankUpdateResult rank_update(const Tensor3& window, const Ranks& ranks, double current_cost,
                             const FullParamSet& history, std::size_t window_start,
                             std::size_t stream_length, const StreamConfig& config) {
  RankUpdateResult result{ranks, std::nullopt, current_cost, 0};
  const EstimatorOptions options = config.estimator_options();
  for (const Ranks& candidate : neighbours(ranks, config.grid)) {
    try {
      EstimationResult est =
          model_estimation(window, candidate, window_start, stream_length, options);
      ++result.evaluated;
      const FullParamSet trial = with_candidate(history, est.model, stream_length);
      const double cost = total_cost(window, trial).total_bits;
      if (std::isfinite(cost) && cost < result.cost) {
        result.cost = cost;
        result.ranks = candidate;
        result.model = std::move(est.model);
      }
    } catch (const Error&) {
    }
  }
  return result;
}

UpdateDecision model_update(const Tensor3& window, FullParamSet& models,
                            std::optional<ModelParams> candidate, Ranks& ranks, std::size_t now,
                            const StreamConfig& config) {
  if (models.empty()) throw std::logic_error("model_update needs an initialized parameter set");
  const std::size_t window_start = now - window.dims().time;

  FullParamSet keep = models;
  keep.active_model() = refresh_model(models.active_model(), window, window_start, now);
  UpdateDecision decision;
  decision.keep_cost = total_cost(window, keep);
  decision.total_bits = decision.keep_cost.total_bits;

  if (candidate) {
    FullParamSet grown = with_candidate(keep, std::move(*candidate), now);
    decision.switch_cost = total_cost(window, grown);
    if (decision.switch_cost->total_bits < decision.keep_cost.total_bits) {
      decision.switched = true;
      decision.total_bits = decision.switch_cost->total_bits;
      decision.rank_update_ran = true;
      RankUpdateResult revised =
          rank_update(window, ranks, decision.total_bits, keep, window_start, now, config);
      if (revised.model) {
        grown.models.back().model = std::move(*revised.model);
        decision.total_bits = revised.cost;
        decision.ranks_changed = revised.ranks != ranks;
        ranks = revised.ranks;
      }
      models = std::move(grown);
      return decision;
    }
  }
  models = std::move(keep);
  return decision;
}

ForecastResult forecast(const FullParamSet& models, std::size_t horizon) {
  if (horizon == 0) throw DimensionError("forecast horizon must be >= 1");
  const ModelParams& m = models.active_model();
  const std::size_t length = m.window_length;
  ForecastResult out;
  out.seasonal = extend_seasonal(m.seasonal, horizon);
  try {
    const Trajectory traj = generate(m.trend.rd, length + horizon);
    out.trend = expand(traj.core.time_range(length, horizon), m.trend.w_key, m.trend.w_loc);
  } catch (const DivergenceError&) {
    out.trend_fallback = true;
    Tensor3 last = reconstruct_trend(m.trend, length).time_range(length - 1, 1);
    out.trend = Tensor3(out.seasonal.dims());
    for (std::size_t h = 0; h < horizon; ++h) {
      auto dst = out.trend.slice(h);
      const auto src = last.slice(0);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  out.values = out.trend + out.seasonal;
  out.provenance.assign(horizon, models.active);
  return out;
}

StreamResult run_stream(const Tensor3& stream, const StreamConfig& config,
                        const StepObserver& observer) {
  config.validate();
  const std::size_t n = stream.dims().time;
  const std::size_t lc = config.window;
  if (n <= lc) {
    throw ConfigError("stream of length " + std::to_string(n) + " must be longer than L_c = " +
                      std::to_string(lc));
  }
  if (!stream.all_finite()) throw ParseError("stream contains NaN or Inf values");

  StreamResult result;
  result.stream_length = n;
  result.init = initialize(stream.time_range(0, lc), config);
  result.ranks = result.init.ranks;
  result.models.models.push_back(ModelEntry{result.init.model, lc});
  result.models.active = 0;

  const EstimatorOptions options = config.estimator_options();
  std::size_t step_index = 0;
  for (std::size_t now = lc + 1; now <= n; ++now, ++step_index) {
    const auto started = std::chrono::steady_clock::now();
    StepRecord record;
    record.now = now;
    const Tensor3 window = stream.time_range(now - lc, lc);

    std::optional<ModelParams> candidate;
    if (step_index % config.refit_stride == 0) {
      record.estimated = true;
      try {
        candidate = model_estimation(window, result.ranks, now - lc, now, options).model;
      } catch (const Error&) {
        record.estimation_failed = true;
      }
    }
    record.decision = model_update(window, result.models, std::move(candidate), result.ranks, now, config);
    result.forecasts.push_back(ForecastRecord{now, forecast(result.models, config.horizon)});

    const ModelParams& active = result.models.active_model();
    record.ranks = result.ranks;
    record.outliers = outlier_cells(active);
    {
      const Tensor3 fit = reconstruct(active).total();
      const auto last = fit.slice(fit.dims().time - 1);
      record.last_fit.assign(last.begin(), last.end());
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (observer) observer(record);
    result.steps.push_back(std::move(record));
  }
  return result;
}

}  // namespace rdstream
