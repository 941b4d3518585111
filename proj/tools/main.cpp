#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rdstream/error.hpp"

namespace {

// Exit codes 1-7 mirror ErrorCategory; anything else is internal.
constexpr int kInternalExit = 70;

}  // namespace

int main(int argc, char** argv) {
  using namespace rdstream::cli;
  CLI::App app{"Streaming reaction-diffusion tensor model: fit, stream, forecast, evaluate"};
  app.require_subcommand(1);

  CommonOptions common;
  const auto add_common = [&](CLI::App* sub, bool stream_flags) {
    sub->add_option("--window", common.window, "window length L_c")->capture_default_str();
    sub->add_option("--period", common.period, "seasonal period (default: from metadata)");
    sub->add_option("--rank-grid", common.rank_grid, "search ranges dk,dl,ds as lo:hi")
        ->capture_default_str();
    sub->add_option("--seed", common.seed, "seed of the factor initialization")->capture_default_str();
    sub->add_option("--out-dir", common.out_dir, "output directory")->capture_default_str();
    sub->add_flag("-v,--verbose", common.verbose, "per-step progress on stderr");
    if (stream_flags) {
      sub->add_option("--horizon", common.horizon, "forecast horizon L_f")->capture_default_str();
      sub->add_option("--refit-stride", common.refit_stride, "estimate a candidate every n steps")
          ->capture_default_str();
    }
  };

  std::string data;
  std::string meta;
  std::string model;
  std::string log;
  std::size_t warmup = 0;
  std::optional<std::size_t> start;

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic stream with known structure");
  synth_cmd->add_option("--length", synth.length)->capture_default_str();
  synth_cmd->add_option("--keys", synth.keys)->capture_default_str();
  synth_cmd->add_option("--locs", synth.locs)->capture_default_str();
  synth_cmd->add_option("--period", synth.period)->capture_default_str();
  synth_cmd->add_option("--shift-at", synth.shift_at, "regime shift index, negative for none")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise)->capture_default_str();
  synth_cmd->add_option("--spikes", synth.spikes)->capture_default_str();
  synth_cmd->add_option("--seed", common.seed)->capture_default_str();
  synth_cmd->add_option("--out-dir", common.out_dir)->capture_default_str();

  CLI::App* fit_cmd = app.add_subcommand("fit", "select ranks and fit one window");
  fit_cmd->add_option("data", data, "stream CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("meta", meta, "metadata JSON")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--start", start, "first slice of the window (default: last L_c slices)");
  add_common(fit_cmd, false);

  CLI::App* stream_cmd = app.add_subcommand("stream", "run the streaming model over a whole file");
  stream_cmd->add_option("data", data, "stream CSV")->required()->check(CLI::ExistingFile);
  stream_cmd->add_option("meta", meta, "metadata JSON")->required()->check(CLI::ExistingFile);
  stream_cmd->add_option("--warmup", warmup, "ignore forecasts issued before this index in the report");
  add_common(stream_cmd, true);

  CLI::App* forecast_cmd = app.add_subcommand("forecast", "forecast from a saved model");
  forecast_cmd->add_option("model", model, "model JSON")->required()->check(CLI::ExistingFile);
  forecast_cmd->add_option("--horizon", common.horizon)->capture_default_str();
  forecast_cmd->add_option("--out-dir", common.out_dir)->capture_default_str();

  CLI::App* eval_cmd = app.add_subcommand("eval", "MAE and RMSE of a forecast log");
  eval_cmd->add_option("log", log, "forecast log CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("data", data, "stream CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("meta", meta, "metadata JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--warmup", warmup);

  CLI::App* export_cmd = app.add_subcommand("export", "write plot data for a saved model");
  export_cmd->add_option("model", model, "model JSON")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out-dir", common.out_dir)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return run_synth(common, synth);
    if (*fit_cmd) return run_fit(common, data, meta, start);
    if (*stream_cmd) return run_stream(common, data, meta, warmup);
    if (*forecast_cmd) return run_forecast(common, model);
    if (*eval_cmd) return run_eval(log, data, meta, warmup);
    if (*export_cmd) return run_export(common, model);
  } catch (const rdstream::Error& e) {
    std::cerr << "error [" << rdstream::to_string(e.category()) << "]: " << e.what() << '\n';
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << '\n';
    return kInternalExit;
  }
  return kInternalExit;
}
