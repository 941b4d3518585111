#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rdstream/mdl.hpp"
#include "rdstream/model.hpp"
#include "rdstream/stream_engine.hpp"
#include "rdstream/tensor.hpp"

namespace rdstream {

/// Sidecar metadata of a stream file.
struct StreamMeta {
  std::vector<std::string> keywords;
  std::vector<std::string> locations;
  std::size_t period = 52;
  std::string sampling = "weekly";
};

/// Min-max scaling: normalized = (raw - offset) / scale.
struct Normalization {
  double offset = 0.0;
  double scale = 1.0;

  double normalize(double raw) const noexcept { return (raw - offset) / scale; }
  double denormalize(double value) const noexcept { return value * scale + offset; }
};

struct Dataset {
  Tensor3 stream;  // (time, keyword, location), normalized to [0, 1]
  StreamMeta meta;
  Normalization normalization;
};

/// Reads a long-format CSV with header `t,keyword,location,value` and a JSON
/// sidecar {"keywords": [...], "locations": [...], "period": p, "sampling": s}.
/// Every (t, keyword, location) triple for t = 0..T-1 must appear exactly
/// once. Values are min-max normalized to [0, 1].
Dataset ingest(const std::filesystem::path& csv_path, const std::filesystem::path& meta_path);
Dataset ingest(std::istream& csv, std::istream& meta);

StreamMeta parse_meta(std::istream& meta);
void write_meta(const StreamMeta& meta, std::ostream& out);

/// Writes the stream in the ingest format with values mapped back to the raw
/// scale.
void write_stream_csv(const Tensor3& stream, const StreamMeta& meta, const Normalization& norm,
                      std::ostream& out);
/// Writes `<stem>.csv` and `<stem>.json` next to each other.
void write_dataset(const Dataset& data, const std::filesystem::path& stem);

struct ErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

struct MetricReport {
  std::size_t horizon = 0;
  std::size_t forecasts = 0;
  ErrorStats overall;
  std::vector<ErrorStats> per_horizon;                  // index h - 1
  std::vector<ErrorStats> per_keyword;                  // all horizons
  std::vector<std::vector<ErrorStats>> per_keyword_horizon;
};

/// One logged forecast value in normalized units.
struct ForecastPoint {
  std::size_t origin = 0;
  std::size_t step = 0;  // 1-based horizon
  std::size_t keyword = 0;
  std::size_t location = 0;
  double value = 0.0;

  std::size_t target() const noexcept { return origin + step - 1; }
};

std::vector<ForecastPoint> flatten(const std::vector<ForecastRecord>& log);

/// Points whose target index is < `realized` and whose origin is >= `warmup`.
std::vector<ForecastPoint> realized_points(const std::vector<ForecastPoint>& points,
                                           std::size_t realized, std::size_t warmup = 0);

/// MAE and RMSE of every point against `truth` (normalized scale). Throws
/// EvaluationError naming the missing targets when any point falls outside
/// the truth tensor.
MetricReport evaluate(const std::vector<ForecastPoint>& points, const Tensor3& truth);
MetricReport evaluate(const std::vector<ForecastRecord>& log, const Tensor3& truth);

/// Human-readable table with values in units of 1e-2.
std::string format_report(const MetricReport& report, const StreamMeta* meta = nullptr);

void write_forecast_log(const std::vector<ForecastPoint>& points, std::ostream& out);
std::vector<ForecastPoint> read_forecast_log(std::istream& in);

/// Everything needed to reuse a fitted parameter set.
struct ModelDocument {
  FullParamSet models;
  StreamMeta meta;
  Normalization normalization;
};

std::string serialize_model(const ModelDocument& doc);
ModelDocument parse_model(const std::string& text);
void export_model(const ModelDocument& doc, const std::filesystem::path& path);
ModelDocument import_model(const std::filesystem::path& path);

/// Diffusion entries above this fraction of the largest entry are listed as
/// edges in the plot export.
inline constexpr double kEdgeFloorFraction = 0.01;

struct DiffusionEdge {
  std::size_t group = 0;  // latent keyword group i
  std::size_t from = 0;   // j'
  std::size_t to = 0;     // j
  double strength = 0.0;
};

std::vector<DiffusionEdge> diffusion_edges(const DiffusionTensor& diffusion);

/// Writes trajectories.csv, factors.csv, diffusion_edges.csv and switches.csv
/// into `dir`; with a stream run and the observed stream it also writes
/// fit.csv (truth, fit and residual per cell, raw scale) and forecasts.csv.
void export_plotdata(const ModelDocument& doc, const std::filesystem::path& dir,
                     const StreamResult* run = nullptr, const Tensor3* truth = nullptr);

}  // namespace rdstream
