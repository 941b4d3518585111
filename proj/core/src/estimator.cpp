#include "rdstream/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

using Index = Eigen::Index;

constexpr double kMaxInitialRate = 0.2;

struct State {
  TrendParams trend;
  SeasonalParams seasonal;
  Tensor3 outliers;
  EncodingModel encoding;
  Tensor3 xd;
  Tensor3 xs;
};

double fit_error(const Tensor3& x, const State& s) {
  const auto a = x.data();
  const auto d = s.xd.data();
  const auto e = s.xs.data();
  const auto o = s.outliers.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - d[i] - e[i] - o[i];
    sum += r * r;
  }
  return std::sqrt(sum);
}

void check_window(const Tensor3& window, const Ranks& ranks, const EstimatorOptions& options) {
  if (window.empty()) throw DimensionError("empty estimation window");
  if (!window.all_finite()) throw InitializationError("estimation window contains NaN or Inf");
  const Dims& d = window.dims();
  if (ranks.dk == 0 || ranks.dl == 0) throw DimensionError("trend ranks must be >= 1");
  if (ranks.dk > d.key || ranks.dl > d.loc) {
    throw DimensionError("trend ranks exceed the keyword/location counts; reduce the rank");
  }
  if (ranks.ds > 0) {
    if (options.period < 2 || d.time < 2 * options.period) {
      throw InitializationError("window of length " + std::to_string(d.time) +
                                " is shorter than two seasonal periods (" +
                                std::to_string(2 * options.period) + "); increase L_c");
    }
    if (ranks.ds > d.key || ranks.ds > d.loc || ranks.ds > d.time) {
      throw DimensionError("seasonal rank exceeds a tensor extent; reduce the rank");
    }
  }
}

State initialize(const Tensor3& x, const Ranks& ranks, const EstimatorOptions& options) {
  const Dims& d = x.dims();
  State s;
  Tensor3 trend_split = x;
  if (ranks.ds > 0) {
    StlSplit split = stl_split(x, options.period, options.stl);
    s.seasonal = cp_als(split.seasonal, ranks.ds, options.period, options.cp).params;
    if (options.periodic_seasonal) {
      s.seasonal.s_time = periodic_projection(s.seasonal.s_time, options.period);
    }
    trend_split = std::move(split.trend);
  } else {
    s.seasonal = SeasonalParams::zero(d.time, d.key, d.loc, options.period);
  }
  NtdResult ntd = ntd_init(trend_split, ranks.dk, ranks.dl, options.ntd);
  s.trend = TrendParams{std::move(ntd.w_key), std::move(ntd.w_loc), initial_dynamics(ntd.core)};
  normalize_gauge(s.trend);
  s.outliers = Tensor3(d);
  s.encoding.quantization_step = options.quantization_step;
  s.xd = reconstruct_trend(s.trend, d.time);
  s.xs = reconstruct_seasonal(s.seasonal);
  return s;
}

// Theta_d block: LM on the dynamics, then guarded multiplicative factor updates.
void update_trend(const Tensor3& x, State& s, int lm_iterations, EstimationResult& result) {
  const std::size_t length = x.dims().time;
  Tensor3 target = x;
  target -= s.xs;
  target -= s.outliers;

  LmOptions lm;
  lm.max_iterations = lm_iterations;
  const LmResult fit = fit_lm(target, s.trend.w_key, s.trend.w_loc, s.trend.rd, lm);
  if (fit.no_progress && fit.initial_residual_norm > 0.0) result.lm_no_progress = true;
  s.trend.rd = fit.params;
  Tensor3 core = generate(s.trend.rd, length).core;

  double current = fit.residual_norm;
  for (Mode mode : {Mode::kKey, Mode::kLoc}) {
    Matrix updated = update_trend_factor(target, core, s.trend.w_key, s.trend.w_loc, mode);
    const Matrix& w_key = mode == Mode::kKey ? updated : s.trend.w_key;
    const Matrix& w_loc = mode == Mode::kLoc ? updated : s.trend.w_loc;
    const double err = (target - expand(core, w_key, w_loc)).norm();
    if (err <= current) {
      (mode == Mode::kKey ? s.trend.w_key : s.trend.w_loc) = std::move(updated);
      current = err;
    }
  }
  normalize_gauge(s.trend);
  s.xd = reconstruct_trend(s.trend, length);
}

void update_seasonal(const Tensor3& x, State& s, bool periodic) {
  if (s.seasonal.rank() == 0) return;
  Tensor3 target = x;
  target -= s.xd;
  target -= s.outliers;
  double current = (target - s.xs).norm();
  for (Mode mode : {Mode::kTime, Mode::kKey, Mode::kLoc}) {
    SeasonalParams updated = update_seasonal_factor(target, s.seasonal, mode);
    if (periodic && mode == Mode::kTime) {
      updated.s_time = periodic_projection(updated.s_time, updated.period);
    }
    Tensor3 xs = reconstruct_seasonal(updated);
    const double err = (target - xs).norm();
    if (err <= current) {
      s.seasonal = std::move(updated);
      s.xs = std::move(xs);
      current = err;
    }
  }
}

void update_outliers(const Tensor3& x, State& s, std::size_t stream_length, double q) {
  Tensor3 residual = x;
  residual -= s.xd;
  residual -= s.xs;
  s.encoding = fit_encoding(residual, s.outliers, q);
  s.outliers = sparsify_outliers(residual, stream_length, s.encoding);
}

}  // namespace

RDParams initial_dynamics(const Tensor3& core) {
  const Dims& d = core.dims();
  RDParams rd = RDParams::zero(d.key, d.loc);
  const double n = static_cast<double>(d.time);
  const double tbar = (n - 1.0) / 2.0;
  for (std::size_t i = 0; i < d.key; ++i) {
    for (std::size_t j = 0; j < d.loc; ++j) {
      rd.initial(static_cast<Index>(i), static_cast<Index>(j)) = std::max(core(0, i, j), 0.0);
      if (d.time < 2) continue;
      double ybar = 0.0;
      for (std::size_t t = 0; t < d.time; ++t) ybar += std::log(std::max(core(t, i, j), 1e-12));
      ybar /= n;
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t t = 0; t < d.time; ++t) {
        const double dt = static_cast<double>(t) - tbar;
        sxy += dt * (std::log(std::max(core(t, i, j), 1e-12)) - ybar);
        sxx += dt * dt;
      }
      rd.growth(static_cast<Index>(i), static_cast<Index>(j)) =
          std::clamp(sxy / sxx, -kMaxInitialRate, kMaxInitialRate);
    }
  }
  return rd;
}

EstimationResult model_estimation(const Tensor3& window, const Ranks& ranks,
                                  std::size_t window_start, std::size_t stream_length,
                                  const EstimatorOptions& options) {
  check_window(window, ranks, options);
  const Dims& d = window.dims();
  const std::size_t n = std::max(stream_length, window_start + d.time);

  EstimationResult result;
  State state = initialize(window, ranks, options);
  double previous = fit_error(window, state);
  result.error_history.push_back(previous);

  for (int iter = 0; iter < options.max_outer_iterations; ++iter) {
    State next = state;
    try {
      update_trend(window, next,
                   iter == 0 ? options.first_lm_iterations : options.lm_iterations, result);
    } catch (const DivergenceError&) {
      result.diverged = true;
      break;
    }
    update_seasonal(window, next, options.periodic_seasonal);
    update_outliers(window, next, n, options.quantization_step);

    const double err = fit_error(window, next);
    if (!(err <= previous)) break;
    state = std::move(next);
    result.error_history.push_back(err);
    ++result.outer_iterations;
    const bool converged = previous - err <= options.tolerance * previous;
    previous = err;
    if (converged || err == 0.0) break;
  }

  ModelParams& m = result.model;
  m.ranks = ranks;
  m.trend = std::move(state.trend);
  m.seasonal = std::move(state.seasonal);
  m.seasonal.period = options.period;
  m.outliers = std::move(state.outliers);
  m.encoding = state.encoding;
  m.window_start = window_start;
  m.window_length = d.time;
  m.stream_length = n;
  if (result.outer_iterations == 0) {
    // Nothing was accepted; still score the initial fit consistently.
    Tensor3 residual = window;
    residual -= state.xd;
    residual -= state.xs;
    m.encoding = fit_encoding(residual, Tensor3(), options.quantization_step);
  }
  return result;
}

}  // namespace rdstream
