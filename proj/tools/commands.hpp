#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "rdstream/stream_engine.hpp"

namespace rdstream::cli {

struct CommonOptions {
  std::size_t window = 104;
  std::size_t horizon = 13;
  std::optional<std::size_t> period;
  std::string rank_grid = "2:4,2:4,0:4";
  std::size_t refit_stride = 1;
  std::uint64_t seed = 0x5eed;
  std::string out_dir = "rdstream-out";
  bool verbose = false;
};

/// Parses "lo:hi,lo:hi,lo:hi" (a single number means lo == hi).
RankGrid parse_rank_grid(const std::string& text);

struct SynthArgs {
  std::size_t length = 300;
  std::size_t keys = 6;
  std::size_t locs = 8;
  std::size_t period = 52;
  long shift_at = 180;
  double noise = 0.005;
  std::size_t spikes = 5;
};

int run_synth(const CommonOptions& common, const SynthArgs& args);
int run_fit(const CommonOptions& common, const std::string& data, const std::string& meta,
            std::optional<std::size_t> start);
int run_stream(const CommonOptions& common, const std::string& data, const std::string& meta,
               std::size_t warmup);
int run_forecast(const CommonOptions& common, const std::string& model);
int run_eval(const std::string& log, const std::string& data, const std::string& meta,
             std::size_t warmup);
int run_export(const CommonOptions& common, const std::string& model);

}  // namespace rdstream::cli
