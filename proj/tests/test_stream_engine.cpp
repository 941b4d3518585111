#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"
#include "rdstream/error.hpp"
#include "rdstream/stream_engine.hpp"
#include "rdstream/synthetic.hpp"

namespace {

using namespace rdstream;

RankGrid single_point(Ranks r) {
  return RankGrid{RankRange{r.dk, r.dk}, RankRange{r.dl, r.dl}, RankRange{r.ds, r.ds}};
}

SyntheticStream stationary(std::size_t length, std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.length = length;
  spec.shift_at = std::nullopt;
  spec.seed = seed;
  return make_synthetic(spec);
}

ModelParams estimate(const Tensor3& window, Ranks r, std::size_t start, std::size_t n) {
  return model_estimation(window, r, start, n).model;
}

TEST(StreamConfig, Validation) {
  StreamConfig ok;
  EXPECT_NO_THROW(ok.validate());
  StreamConfig c = ok;
  c.window = 103;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ok;
  c.horizon = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ok;
  c.grid.dk = RankRange{3, 2};
  EXPECT_THROW(c.validate(), ConfigError);
  c = ok;
  c.refit_stride = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(ok.estimator_options().period, ok.period);
}

TEST(RankGrid, PaperDefaultsInLexicographicOrder) {
  RankGrid g;
  std::vector<Ranks> all = g.enumerate();
  ASSERT_EQ(all.size(), 3u * 3u * 5u);
  EXPECT_EQ(all.front(), (Ranks{2, 2, 0}));
  EXPECT_EQ(all.back(), (Ranks{4, 4, 4}));
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_LT(all[i - 1], all[i]);
  EXPECT_TRUE(g.contains(Ranks{3, 4, 0}));
  EXPECT_FALSE(g.contains(Ranks{1, 2, 0}));
}

TEST(Initialize, SelectsTrueRanks) {
  SyntheticStream syn = stationary(104);
  StreamConfig cfg;
  InitResult init = initialize(syn.stream, cfg);
  EXPECT_EQ(init.ranks, (Ranks{2, 2, 1}));
  EXPECT_EQ(init.scores.size(), 45u);
  for (const CandidateScore& s : init.scores)
    if (!s.failed) EXPECT_GE(s.cost.total_bits, init.cost.total_bits);
  EXPECT_EQ(init.model.ranks, init.ranks);
}

TEST(Initialize, Deterministic) {
  SyntheticStream syn = stationary(104, 3);
  StreamConfig cfg;
  cfg.grid = RankGrid{RankRange{2, 3}, RankRange{2, 3}, RankRange{0, 1}};
  InitResult a = initialize(syn.stream, cfg);
  InitResult b = initialize(syn.stream, cfg);
  EXPECT_EQ(a.ranks, b.ranks);
  EXPECT_EQ(a.cost.total_bits, b.cost.total_bits);
}

TEST(Initialize, AllCandidatesFailing) {
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{5, 2, 1});  // more keyword groups than keywords
  Tensor3 x = oracle::random_tensor(Dims{104, 3, 3}, 2, 0.0, 1.0);
  EXPECT_THROW(initialize(x, cfg), InitializationError);
}

TEST(ModelUpdate, StationaryCandidateIsRejected) {
  SyntheticStream syn = stationary(120);
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{2, 2, 1});
  FullParamSet f;
  f.models.push_back(ModelEntry{estimate(syn.stream.time_range(0, 104), Ranks{2, 2, 1}, 0, 104), 104});
  Ranks ranks{2, 2, 1};
  const Tensor3 window = syn.stream.time_range(6, 104);
  ModelParams candidate = estimate(window, ranks, 6, 110);
  UpdateDecision d = model_update(window, f, candidate, ranks, 110, cfg);
  EXPECT_FALSE(d.switched);
  EXPECT_EQ(f.models.size(), 1u);
  ASSERT_TRUE(d.switch_cost.has_value());
  EXPECT_EQ(d.total_bits, std::min(d.keep_cost.total_bits, d.switch_cost->total_bits));
}

TEST(ModelUpdate, NeverRaisesTheCostOnTheDecidingWindow) {
  SyntheticSpec spec;
  spec.length = 200;
  spec.shift_at = 104;
  SyntheticStream syn = make_synthetic(spec);
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{2, 2, 1});
  FullParamSet f;
  f.models.push_back(ModelEntry{estimate(syn.stream.time_range(0, 104), Ranks{2, 2, 1}, 0, 104), 104});
  Ranks ranks{2, 2, 1};
  for (std::size_t now : {130u, 170u, 200u}) {
    const Tensor3 window = syn.stream.time_range(now - 104, 104);
    FullParamSet before = f;
    UpdateDecision d = model_update(window, f, estimate(window, ranks, now - 104, now), ranks, now, cfg);
    EXPECT_LE(d.total_bits, d.keep_cost.total_bits);
    EXPECT_LE(total_cost(window, f).total_bits, d.keep_cost.total_bits + 1e-6);
    if (d.switched) {
      EXPECT_LT(d.switch_cost->total_bits, d.keep_cost.total_bits);
      EXPECT_EQ(f.models.size(), before.models.size() + 1);
      EXPECT_EQ(f.models.back().activated_at, now);
      EXPECT_EQ(f.active, f.models.size() - 1);
    }
  }
}

TEST(RankUpdate, SkipsOutOfGridNeighbours) {
  SyntheticStream syn = stationary(104);
  StreamConfig cfg;
  FullParamSet none;
  RankUpdateResult r = rank_update(syn.stream, Ranks{2, 2, 0}, -std::numeric_limits<double>::infinity(),
                                   none, 0, 104, cfg);
  // (1,2,0), (2,1,0) and (2,2,-1) fall outside; (3,2,0), (2,3,0), (2,2,1) remain
  EXPECT_EQ(r.evaluated, 3);
  EXPECT_EQ(r.ranks, (Ranks{2, 2, 0}));
  EXPECT_FALSE(r.model.has_value());
}

TEST(RankUpdate, KeepsGridOptimalRanksAndMatchesExhaustiveOracle) {
  SyntheticStream syn = stationary(104, 2);
  StreamConfig cfg;
  FullParamSet none;
  ModelParams current = estimate(syn.stream, Ranks{2, 2, 1}, 0, 104);
  FullParamSet f;
  f.models.push_back(ModelEntry{current, 104});
  const double current_cost = total_cost(syn.stream, f).total_bits;
  double best = current_cost;
  for (Ranks n : {Ranks{3, 2, 1}, Ranks{2, 3, 1}, Ranks{2, 2, 0}, Ranks{2, 2, 2}}) {
    FullParamSet g;
    g.models.push_back(ModelEntry{estimate(syn.stream, n, 0, 104), 104});
    best = std::min(best, total_cost(syn.stream, g).total_bits);
  }
  RankUpdateResult r = rank_update(syn.stream, Ranks{2, 2, 1}, current_cost, none, 0, 104, cfg);
  EXPECT_EQ(r.evaluated, 4);
  EXPECT_EQ(r.cost, best);
  EXPECT_EQ(r.ranks, (Ranks{2, 2, 1}));
}

TEST(RankUpdate, AdoptsAThirdKeywordGroup) {
  SyntheticSpec spec;
  spec.length = 104;
  spec.shift_at = std::nullopt;
  spec.ranks = Ranks{3, 2, 1};
  spec.growth = 0.006;
  SyntheticStream syn = make_synthetic(spec);
  StreamConfig cfg;
  FullParamSet none;
  FullParamSet f;
  f.models.push_back(ModelEntry{estimate(syn.stream, Ranks{2, 2, 1}, 0, 104), 104});
  const double current_cost = total_cost(syn.stream, f).total_bits;
  RankUpdateResult r = rank_update(syn.stream, Ranks{2, 2, 1}, current_cost, none, 0, 104, cfg);
  EXPECT_EQ(r.ranks.dk, 3u);
  EXPECT_LT(r.cost, current_cost);
  ASSERT_TRUE(r.model.has_value());
  EXPECT_EQ(r.model->ranks, r.ranks);
}

ModelParams seasonal_only(std::size_t lc, std::size_t period) {
  ModelParams m;
  m.ranks = Ranks{1, 1, 1};
  m.trend.w_key = Matrix::Ones(1, 2);
  m.trend.w_loc = Matrix::Ones(1, 3);
  m.trend.rd = RDParams::zero(1, 1);
  m.seasonal.period = period;
  m.seasonal.s_time.resize(1, static_cast<long>(lc));
  for (std::size_t t = 0; t < lc; ++t)
    m.seasonal.s_time(0, static_cast<long>(t)) = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period));
  m.seasonal.s_key = Matrix::Ones(1, 2);
  m.seasonal.s_loc = Matrix::Constant(1, 3, 0.5);
  m.outliers = Tensor3(Dims{lc, 2, 3});
  m.window_length = lc;
  m.stream_length = lc;
  return m;
}

FullParamSet holding(ModelParams m) {
  FullParamSet f;
  f.models.push_back(ModelEntry{std::move(m), 0});
  return f;
}

TEST(Forecast, SeasonalOnlyModelIsPeriodicExtension) {
  const std::size_t lc = 20, p = 5;
  ModelParams m = seasonal_only(lc, p);
  ForecastResult f = forecast(holding(m), 12);
  EXPECT_EQ(f.trend.count_nonzero(), 0u);
  Tensor3 rec = reconstruct_seasonal(m.seasonal);
  for (std::size_t h = 0; h < 12; ++h)
    for (std::size_t u = 0; u < 2; ++u)
      for (std::size_t v = 0; v < 3; ++v) {
        EXPECT_EQ(f.values(h, u, v), rec(lc - p + h % p, u, v));
        if (h + p < 12) EXPECT_EQ(f.values(h, u, v), f.values(h + p, u, v));
      }
}

TEST(Forecast, ExponentialTrendClosedForm) {
  const std::size_t lc = 30;
  ModelParams m = seasonal_only(lc, 5);
  m.seasonal = SeasonalParams::zero(lc, 2, 3, 5);
  m.trend.rd.growth(0, 0) = 0.05;
  m.trend.rd.initial(0, 0) = 1.0;
  ForecastResult f = forecast(holding(m), 13);
  const Tensor3 fit = reconstruct(m).trend;
  const double last = fit(lc - 1, 0, 0);
  for (std::size_t h = 1; h <= 13; ++h)
    EXPECT_NEAR(f.values(h - 1, 1, 2) / (last * std::exp(0.05 * static_cast<double>(h))), 1.0, 1e-3);
}

TEST(Forecast, OneStepContinuity) {
  SyntheticStream syn = stationary(104);
  ModelParams m = estimate(syn.stream, Ranks{2, 2, 1}, 0, 104);
  ForecastResult f = forecast(holding(m), 1);
  Reconstruction rec = reconstruct(m);
  Tensor3 smooth = rec.trend + rec.seasonal;
  double max_increment = 0.0;
  for (std::size_t t = 1; t < 104; ++t)
    for (std::size_t u = 0; u < 6; ++u)
      for (std::size_t v = 0; v < 8; ++v)
        max_increment = std::max(max_increment, std::abs(smooth(t, u, v) - smooth(t - 1, u, v)));
  for (std::size_t u = 0; u < 6; ++u)
    for (std::size_t v = 0; v < 8; ++v)
      EXPECT_LE(std::abs(f.values(0, u, v) - smooth(103, u, v)), max_increment);
}

TEST(Forecast, SplitIsExactAndProvenanceIsActive) {
  SyntheticStream syn = stationary(104);
  FullParamSet fs = holding(estimate(syn.stream, Ranks{2, 2, 1}, 0, 104));
  fs.models.push_back(fs.models.front());
  fs.models.back().activated_at = 5;
  fs.active = 1;
  ForecastResult f = forecast(fs, 13);
  EXPECT_EQ(f.values, f.trend + f.seasonal);
  EXPECT_EQ(f.provenance, std::vector<std::size_t>(13, 1));
  EXPECT_FALSE(f.trend_fallback);
  EXPECT_TRUE(f.values.all_finite());
}

TEST(Forecast, DivergentTrendHoldsLastValue) {
  const std::size_t lc = 20;
  ModelParams m = seasonal_only(lc, 5);
  m.trend.rd.growth(0, 0) = 1.2;  // e^(1.2 * 20) stays below the guard, the horizon does not
  m.trend.rd.initial(0, 0) = 1.0;
  ForecastResult f = forecast(holding(m), 13);
  EXPECT_TRUE(f.trend_fallback);
  const double last = reconstruct(m).trend(lc - 1, 0, 0);
  for (std::size_t h = 0; h < 13; ++h) EXPECT_EQ(f.trend(h, 0, 0), last);
  EXPECT_EQ(f.values, f.trend + f.seasonal);
}

TEST(RunStream, OneStepStream) {
  SyntheticStream syn = stationary(105);
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{2, 2, 1});
  StreamResult r = run_stream(syn.stream, cfg);
  ASSERT_EQ(r.steps.size(), 1u);
  ASSERT_EQ(r.forecasts.size(), 1u);
  EXPECT_EQ(r.forecasts[0].origin, 105u);
  EXPECT_EQ(r.models.models.front().activated_at, 104u);
}

TEST(RunStream, RejectsStreamNoLongerThanWindow) {
  SyntheticStream syn = stationary(104);
  EXPECT_THROW(run_stream(syn.stream, StreamConfig{}), ConfigError);
}

TEST(RunStream, NoLookahead) {
  SyntheticStream syn = stationary(115);
  Tensor3 altered = syn.stream;
  for (std::size_t t = 110; t < 115; ++t)
    for (double& v : altered.slice(t)) v = 0.5 * v + 0.3;
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{2, 2, 1});
  StreamResult a = run_stream(syn.stream, cfg);
  StreamResult b = run_stream(altered, cfg);
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    if (a.steps[s].now > 110) break;
    EXPECT_EQ(a.forecasts[s].result.values, b.forecasts[s].result.values) << "step " << a.steps[s].now;
    EXPECT_EQ(a.steps[s].decision.switched, b.steps[s].decision.switched);
  }
}

TEST(RunStream, RegimeShiftAppendsWithinOneWindow) {
  SyntheticSpec spec;
  spec.length = 240;
  spec.shift_at = 130;
  SyntheticStream syn = make_synthetic(spec);
  StreamConfig cfg;
  cfg.grid = single_point(Ranks{2, 2, 1});
  StreamResult r = run_stream(syn.stream, cfg);
  std::vector<std::size_t> sw = r.switch_times();
  ASSERT_FALSE(sw.empty());
  bool in_range = false;
  for (std::size_t t : sw) in_range = in_range || (t > 130 && t <= 130 + 104);
  EXPECT_TRUE(in_range);
  for (std::size_t i = 1; i < r.models.models.size(); ++i)
    EXPECT_LT(r.models.models[i - 1].activated_at, r.models.models[i].activated_at);
}

TEST(RunStream, StationaryStreamKeepsFewModels) {
  SyntheticStream syn = stationary(600, 5);
  StreamConfig cfg;
  StreamResult r = run_stream(syn.stream, cfg);
  EXPECT_EQ(r.steps.size(), 600u - 104u);
  EXPECT_EQ(r.forecasts.size(), 600u - 104u);
  EXPECT_LE(r.models.models.size(), 3u);
  EXPECT_EQ(r.switch_times().size(), r.models.models.size() - 1);
  for (std::size_t i = 1; i < r.models.models.size(); ++i)
    EXPECT_LT(r.models.models[i - 1].activated_at, r.models.models[i].activated_at);
}

}  // namespace
