#include "commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <vector>

#include "rdstream/error.hpp"
#include "rdstream/io.hpp"
#include "rdstream/synthetic.hpp"

namespace rdstream::cli {

namespace fs = std::filesystem;

namespace {

RankRange parse_range(const std::string& text) {
  const auto colon = text.find(':');
  const std::string lo = text.substr(0, colon);
  const std::string hi = colon == std::string::npos ? lo : text.substr(colon + 1);
  RankRange r;
  const auto parse = [&](const std::string& s, std::size_t& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw ConfigError("bad rank range '" + text + "'");
    }
  };
  parse(lo, r.lo);
  parse(hi, r.hi);
  if (r.lo > r.hi) throw ConfigError("empty rank range '" + text + "'");
  return r;
}

StreamConfig make_config(const CommonOptions& common, const StreamMeta& meta) {
  StreamConfig config;
  config.window = common.window;
  config.horizon = common.horizon;
  config.period = common.period.value_or(meta.period);
  config.grid = parse_rank_grid(common.rank_grid);
  config.refit_stride = common.refit_stride;
  config.estimator.ntd.seed = common.seed;
  config.validate();
  return config;
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  return fs::path(dir);
}

std::ofstream open(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

std::string ranks_text(const Ranks& r) {
  return "(" + std::to_string(r.dk) + "," + std::to_string(r.dl) + "," + std::to_string(r.ds) + ")";
}

}  // namespace

RankGrid parse_rank_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() != 3) throw ConfigError("--rank-grid needs three ranges, e.g. 2:4,2:4,0:4");
  return RankGrid{parse_range(parts[0]), parse_range(parts[1]), parse_range(parts[2])};
}

int run_synth(const CommonOptions& common, const SynthArgs& args) {
  SyntheticSpec spec;
  spec.length = args.length;
  spec.keys = args.keys;
  spec.locs = args.locs;
  spec.period = args.period;
  spec.noise = args.noise;
  spec.spikes = args.spikes;
  spec.seed = common.seed;
  if (args.shift_at < 0) {
    spec.shift_at.reset();
  } else {
    spec.shift_at = static_cast<std::size_t>(args.shift_at);
  }
  const SyntheticStream synth = make_synthetic(spec);
  Dataset data;
  data.stream = synth.stream;
  data.meta.period = spec.period;
  data.meta.sampling = "synthetic";
  for (std::size_t u = 0; u < spec.keys; ++u) data.meta.keywords.push_back("kw" + std::to_string(u));
  for (std::size_t v = 0; v < spec.locs; ++v) data.meta.locations.push_back("loc" + std::to_string(v));
  const fs::path dir = prepare_dir(common.out_dir);
  write_dataset(data, dir / "synthetic");
  std::ofstream spikes = open(dir / "synthetic_spikes.csv");
  spikes << "t,keyword,location\n";
  for (const Cell& c : synth.spikes) spikes << c[0] << ',' << c[1] << ',' << c[2] << '\n';
  std::cout << "wrote " << (dir / "synthetic.csv").string() << " and " << (dir / "synthetic.json").string()
            << '\n';
  return 0;
}

int run_fit(const CommonOptions& common, const std::string& data_path, const std::string& meta_path,
            std::optional<std::size_t> start) {
  const Dataset data = ingest(data_path, meta_path);
  const StreamConfig config = make_config(common, data.meta);
  const std::size_t n = data.stream.dims().time;
  if (n < config.window) {
    throw ConfigError("stream has " + std::to_string(n) + " slices, fewer than L_c = " +
                      std::to_string(config.window));
  }
  const std::size_t begin = start.value_or(n - config.window);
  if (begin + config.window > n) throw ConfigError("--start puts the window past the end of the stream");

  const InitResult init = initialize(data.stream.time_range(begin, config.window), config);
  ModelDocument doc;
  doc.meta = data.meta;
  doc.normalization = data.normalization;
  ModelParams model = init.model;
  model.window_start = begin;
  doc.models.models.push_back(ModelEntry{std::move(model), begin + config.window});

  const fs::path dir = prepare_dir(common.out_dir);
  export_model(doc, dir / "model.json");
  export_plotdata(doc, dir);
  std::ofstream grid = open(dir / "rank_grid.csv");
  grid << "dk,dl,ds,model_bits,coding_bits,total_bits,failed\n";
  for (const CandidateScore& s : init.scores) {
    grid << s.ranks.dk << ',' << s.ranks.dl << ',' << s.ranks.ds << ',' << s.cost.model_bits << ','
         << s.cost.coding_bits << ',' << s.cost.total_bits << ',' << (s.failed ? 1 : 0) << '\n';
  }
  std::cout << "window [" << begin << ", " << begin + config.window << ")  ranks "
            << ranks_text(init.ranks) << "  bits: model " << init.cost.model_bits << " coding "
            << init.cost.coding_bits << " total " << init.cost.total_bits << '\n'
            << "outliers: " << init.model.outliers.count_nonzero() << '\n';
  return 0;
}

int run_stream(const CommonOptions& common, const std::string& data_path,
               const std::string& meta_path, std::size_t warmup) {
  const Dataset data = ingest(data_path, meta_path);
  const StreamConfig config = make_config(common, data.meta);
  const StepObserver observer = [&](const StepRecord& s) {
    if (!common.verbose) return;
    std::cerr << "t=" << s.now << " ranks " << ranks_text(s.ranks)
              << (s.decision.switched ? " switch" : "") << (s.decision.ranks_changed ? " rank-update" : "")
              << (s.estimation_failed ? " candidate-failed" : "") << " bits " << s.decision.total_bits
              << " " << std::fixed << std::setprecision(3) << s.seconds << "s" << std::defaultfloat
              << '\n';
  };
  const StreamResult run = rdstream::run_stream(data.stream, config, observer);

  ModelDocument doc{run.models, data.meta, data.normalization};
  const fs::path dir = prepare_dir(common.out_dir);
  export_model(doc, dir / "model.json");
  export_plotdata(doc, dir, &run, &data.stream);

  const std::vector<ForecastPoint> points = flatten(run.forecasts);
  {
    std::ofstream out = open(dir / "forecast_log.csv");
    write_forecast_log(points, out);
  }
  {
    std::ofstream out = open(dir / "steps.csv");
    out << "t,estimated,candidate_failed,switched,rank_update,dk,dl,ds,total_bits,outliers,seconds\n";
    for (const StepRecord& s : run.steps) {
      out << s.now << ',' << s.estimated << ',' << s.estimation_failed << ',' << s.decision.switched
          << ',' << s.decision.rank_update_ran << ',' << s.ranks.dk << ',' << s.ranks.dl << ','
          << s.ranks.ds << ',' << s.decision.total_bits << ',' << s.outliers.size() << ','
          << s.seconds << '\n';
    }
  }
  std::cout << "initial ranks " << ranks_text(run.init.ranks) << ", final ranks " << ranks_text(run.ranks)
            << ", models " << run.models.models.size() << '\n';
  for (std::size_t t : run.switch_times()) std::cout << "switch at t=" << t << '\n';

  const auto realized = realized_points(points, data.stream.dims().time, warmup);
  if (realized.empty()) {
    std::cout << "no realized forecasts to evaluate\n";
    return 0;
  }
  const std::string report = format_report(evaluate(realized, data.stream), &data.meta);
  std::cout << report;
  std::ofstream out = open(dir / "metrics.txt");
  out << report;
  return 0;
}

int run_forecast(const CommonOptions& common, const std::string& model_path) {
  const ModelDocument doc = import_model(model_path);
  const ForecastResult f = forecast(doc.models, common.horizon);
  const ModelParams& active = doc.models.active_model();
  const fs::path dir = prepare_dir(common.out_dir);
  std::ofstream out = open(dir / "forecast.csv");
  out << "t,keyword,location,forecast,trend,seasonal\n";
  const Dims& d = f.values.dims();
  for (std::size_t h = 0; h < d.time; ++h)
    for (std::size_t u = 0; u < d.key; ++u)
      for (std::size_t v = 0; v < d.loc; ++v) {
        // The seasonal part is additive around the trend, so only the level
        // takes the normalization offset.
        out << active.window_end() + h << ',' << doc.meta.keywords[u] << ',' << doc.meta.locations[v] << ','
            << doc.normalization.denormalize(f.values(h, u, v)) << ','
            << doc.normalization.denormalize(f.trend(h, u, v)) << ','
            << f.seasonal(h, u, v) * doc.normalization.scale << '\n';
      }
  if (f.trend_fallback) std::cerr << "warning: dynamics diverged, trend held at its last value\n";
  std::cout << "wrote " << (dir / "forecast.csv").string() << " (" << d.time << " steps from t="
            << active.window_end() << ")\n";
  return 0;
}

int run_eval(const std::string& log_path, const std::string& data_path, const std::string& meta_path,
             std::size_t warmup) {
  const Dataset data = ingest(data_path, meta_path);
  std::ifstream in(log_path);
  if (!in) throw IoError("cannot open " + log_path + " for reading");
  std::vector<ForecastPoint> points = read_forecast_log(in);
  if (warmup > 0) points = realized_points(points, std::numeric_limits<std::size_t>::max(), warmup);
  std::cout << format_report(evaluate(points, data.stream), &data.meta);
  return 0;
}

int run_export(const CommonOptions& common, const std::string& model_path) {
  const ModelDocument doc = import_model(model_path);
  const fs::path dir = prepare_dir(common.out_dir);
  export_plotdata(doc, dir);
  std::cout << "wrote plot data for " << doc.models.models.size() << " model(s) to " << dir.string() << '\n';
  return 0;
}

}  // namespace rdstream::cli
