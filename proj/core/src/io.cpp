#include "rdstream/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rdstream/error.hpp"

namespace rdstream {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

std::map<std::string, std::size_t> label_index(const std::vector<std::string>& labels,
                                               const char* what) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw ParseError(std::string("empty ") + what + " label in metadata");
    if (!index.emplace(labels[i], i).second) {
      throw ParseError(std::string("duplicate ") + what + " label '" + labels[i] + "' in metadata");
    }
  }
  return index;
}

void accumulate(ErrorStats& s, double err) {
  s.mae += std::abs(err);
  s.rmse += err * err;
  ++s.count;
}

void finish(ErrorStats& s) {
  if (s.count == 0) return;
  s.mae /= static_cast<double>(s.count);
  s.rmse = std::sqrt(s.rmse / static_cast<double>(s.count));
}

Json matrix_json(const Matrix& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw ParseError("matrix entry count does not match its shape");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  return m;
}

Json meta_json(const StreamMeta& meta) {
  return Json{{"keywords", meta.keywords},
              {"locations", meta.locations},
              {"period", meta.period},
              {"sampling", meta.sampling}};
}

StreamMeta meta_from(const Json& j) {
  StreamMeta meta;
  meta.keywords = j.at("keywords").get<std::vector<std::string>>();
  meta.locations = j.at("locations").get<std::vector<std::string>>();
  meta.period = j.at("period").get<std::size_t>();
  if (j.contains("sampling")) meta.sampling = j.at("sampling").get<std::string>();
  if (meta.keywords.empty() || meta.locations.empty()) {
    throw ParseError("metadata needs at least one keyword and one location");
  }
  label_index(meta.keywords, "keyword");
  label_index(meta.locations, "location");
  return meta;
}

Json model_json(const ModelEntry& entry) {
  const ModelParams& m = entry.model;
  Json outliers = Json::array();
  if (!m.outliers.empty()) {
    const Dims& d = m.outliers.dims();
    for (std::size_t t = 0; t < d.time; ++t)
      for (std::size_t u = 0; u < d.key; ++u)
        for (std::size_t v = 0; v < d.loc; ++v)
          if (m.outliers(t, u, v) != 0.0) outliers.push_back(Json::array({t, u, v, m.outliers(t, u, v)}));
  }
  const ModelCostTerms terms = model_cost_terms(m);
  return Json{
      {"activated_at", entry.activated_at},
      {"ranks", Json::array({m.ranks.dk, m.ranks.dl, m.ranks.ds})},
      {"window_start", m.window_start},
      {"window_length", m.window_length},
      {"stream_length", m.stream_length},
      {"w_key", matrix_json(m.trend.w_key)},
      {"w_loc", matrix_json(m.trend.w_loc)},
      {"growth", matrix_json(m.trend.rd.growth)},
      {"diffusion", m.trend.rd.diffusion.values()},
      {"initial", matrix_json(m.trend.rd.initial)},
      {"seasonal",
       Json{{"period", m.seasonal.period},
            {"s_time", matrix_json(m.seasonal.s_time)},
            {"s_key", matrix_json(m.seasonal.s_key)},
            {"s_loc", matrix_json(m.seasonal.s_loc)}}},
      {"outliers", std::move(outliers)},
      {"encoding",
       Json{{"mu", m.encoding.mu},
            {"sigma", m.encoding.sigma},
            {"quantization_step", m.encoding.quantization_step}}},
      {"model_bits",
       Json{{"w_key", terms.w_key},
            {"w_loc", terms.w_loc},
            {"growth", terms.growth},
            {"diffusion", terms.diffusion},
            {"s_time", terms.s_time},
            {"s_key", terms.s_key},
            {"s_loc", terms.s_loc},
            {"outliers", terms.outliers},
            {"total", terms.sum()}}},
  };
}

ModelEntry model_from(const Json& j) {
  ModelEntry entry;
  entry.activated_at = j.at("activated_at").get<std::size_t>();
  ModelParams& m = entry.model;
  const auto ranks = j.at("ranks").get<std::vector<std::size_t>>();
  if (ranks.size() != 3) throw ParseError("ranks must have three entries");
  m.ranks = {ranks[0], ranks[1], ranks[2]};
  m.window_start = j.at("window_start").get<std::size_t>();
  m.window_length = j.at("window_length").get<std::size_t>();
  m.stream_length = j.at("stream_length").get<std::size_t>();
  m.trend.w_key = matrix_from(j.at("w_key"));
  m.trend.w_loc = matrix_from(j.at("w_loc"));
  m.trend.rd.growth = matrix_from(j.at("growth"));
  m.trend.rd.initial = matrix_from(j.at("initial"));
  const std::size_t dk = m.trend.rd.dk();
  const std::size_t dl = m.trend.rd.dl();
  const auto diffusion = j.at("diffusion").get<std::vector<double>>();
  if (diffusion.size() != dk * dl * dl) throw ParseError("diffusion entry count does not match ranks");
  m.trend.rd.diffusion = DiffusionTensor(dk, dl);
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t a = 0; a < dl; ++a)
      for (std::size_t b = 0; b < dl; ++b) m.trend.rd.diffusion(i, a, b) = diffusion[(i * dl + a) * dl + b];
  try {
    m.trend.rd.validate();
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid dynamics in model file: ") + e.what());
  }
  const Json& s = j.at("seasonal");
  m.seasonal.period = s.at("period").get<std::size_t>();
  m.seasonal.s_time = matrix_from(s.at("s_time"));
  m.seasonal.s_key = matrix_from(s.at("s_key"));
  m.seasonal.s_loc = matrix_from(s.at("s_loc"));
  if (m.trend.w_key.rows() != static_cast<Eigen::Index>(m.ranks.dk) ||
      m.trend.w_loc.rows() != static_cast<Eigen::Index>(m.ranks.dl) ||
      m.seasonal.rank() != m.ranks.ds || m.seasonal.length() != m.window_length ||
      m.seasonal.s_key.cols() != m.trend.w_key.cols() ||
      m.seasonal.s_loc.cols() != m.trend.w_loc.cols()) {
    throw ParseError("model shapes are inconsistent with its ranks and window");
  }
  const Dims dims{m.window_length, m.keys(), m.locations()};
  m.outliers = Tensor3(dims);
  for (const Json& o : j.at("outliers")) {
    const auto t = o.at(0).get<std::size_t>();
    const auto u = o.at(1).get<std::size_t>();
    const auto v = o.at(2).get<std::size_t>();
    if (t >= dims.time || u >= dims.key || v >= dims.loc) throw ParseError("outlier index out of range");
    m.outliers(t, u, v) = o.at(3).get<double>();
  }
  const Json& enc = j.at("encoding");
  m.encoding.mu = enc.at("mu").get<double>();
  m.encoding.sigma = enc.at("sigma").get<double>();
  m.encoding.quantization_step = enc.at("quantization_step").get<double>();
  return entry;
}

}  // namespace

StreamMeta parse_meta(std::istream& meta) {
  try {
    return meta_from(Json::parse(meta));
  } catch (const Json::exception& e) {
    throw ParseError(std::string("metadata: ") + e.what());
  }
}

void write_meta(const StreamMeta& meta, std::ostream& out) { out << meta_json(meta).dump(2) << '\n'; }

Dataset ingest(const fs::path& csv_path, const fs::path& meta_path) {
  std::ifstream csv = open_in(csv_path);
  std::ifstream meta = open_in(meta_path);
  try {
    return ingest(csv, meta);
  } catch (const ParseError& e) {
    throw ParseError(csv_path.string() + ": " + e.what());
  }
}

Dataset ingest(std::istream& csv, std::istream& meta_in) {
  Dataset data;
  data.meta = parse_meta(meta_in);
  const auto keys = label_index(data.meta.keywords, "keyword");
  const auto locs = label_index(data.meta.locations, "location");
  const std::size_t nk = keys.size();
  const std::size_t nl = locs.size();

  std::string line;
  if (!std::getline(csv, line)) throw ParseError("empty stream file");
  const auto header = split(line);
  if (header != std::vector<std::string_view>{"t", "keyword", "location", "value"}) {
    throw ParseError("row 1: header must be t,keyword,location,value");
  }

  std::vector<double> values;
  std::vector<std::size_t> seen_row;  // 0 = missing
  std::size_t length = 0;
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    const std::string where = "row " + std::to_string(row) + ": ";
    if (fields.size() != 4) throw ParseError(where + "expected 4 fields, got " + std::to_string(fields.size()));
    std::size_t t = 0;
    if (!parse_number(fields[0], t)) throw ParseError(where + "bad timestamp '" + std::string(fields[0]) + "'");
    const auto k = keys.find(std::string(fields[1]));
    if (k == keys.end()) throw ParseError(where + "unknown keyword '" + std::string(fields[1]) + "'");
    const auto l = locs.find(std::string(fields[2]));
    if (l == locs.end()) throw ParseError(where + "unknown location '" + std::string(fields[2]) + "'");
    double value = 0.0;
    if (!parse_number(fields[3], value) || !std::isfinite(value)) {
      throw ParseError(where + "bad value '" + std::string(fields[3]) + "'");
    }
    if (value < 0.0) throw ParseError(where + "negative value");
    if (t >= length) {
      length = t + 1;
      values.resize(length * nk * nl, 0.0);
      seen_row.resize(length * nk * nl, 0);
    }
    const std::size_t idx = (t * nk + k->second) * nl + l->second;
    if (seen_row[idx] != 0) {
      throw ParseError(where + "duplicate entry for t=" + std::to_string(t) + ", keyword=" +
                       std::string(fields[1]) + ", location=" + std::string(fields[2]) +
                       " (first seen on row " + std::to_string(seen_row[idx]) + ")");
    }
    seen_row[idx] = row;
    values[idx] = value;
  }
  if (length == 0) throw ParseError("stream file has no data rows");
  for (std::size_t idx = 0; idx < seen_row.size(); ++idx) {
    if (seen_row[idx] == 0) {
      const std::size_t v = idx % nl;
      const std::size_t u = (idx / nl) % nk;
      const std::size_t t = idx / (nl * nk);
      throw ParseError("gap: no row for t=" + std::to_string(t) + ", keyword=" +
                       data.meta.keywords[u] + ", location=" + data.meta.locations[v]);
    }
  }

  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  data.normalization.offset = *lo;
  data.normalization.scale = *hi > *lo ? *hi - *lo : 1.0;
  for (double& x : values) x = data.normalization.normalize(x);
  data.stream = Tensor3(Dims{length, nk, nl}, std::move(values));
  return data;
}

void write_stream_csv(const Tensor3& stream, const StreamMeta& meta, const Normalization& norm,
                      std::ostream& out) {
  const Dims& d = stream.dims();
  if (d.key != meta.keywords.size() || d.loc != meta.locations.size()) {
    throw DimensionError("metadata labels do not match the stream shape");
  }
  const auto precision = out.precision(17);
  out << "t,keyword,location,value\n";
  for (std::size_t t = 0; t < d.time; ++t)
    for (std::size_t u = 0; u < d.key; ++u)
      for (std::size_t v = 0; v < d.loc; ++v)
        out << t << ',' << meta.keywords[u] << ',' << meta.locations[v] << ','
            << norm.denormalize(stream(t, u, v)) << '\n';
  out.precision(precision);
}

void write_dataset(const Dataset& data, const fs::path& stem) {
  fs::path csv = stem;
  csv += ".csv";
  fs::path meta = stem;
  meta += ".json";
  std::ofstream out = open_out(csv);
  write_stream_csv(data.stream, data.meta, data.normalization, out);
  std::ofstream mout = open_out(meta);
  write_meta(data.meta, mout);
  if (!out || !mout) throw IoError("failed writing dataset " + stem.string());
}

std::vector<ForecastPoint> flatten(const std::vector<ForecastRecord>& log) {
  std::vector<ForecastPoint> out;
  for (const ForecastRecord& rec : log) {
    const Dims& d = rec.result.values.dims();
    for (std::size_t h = 0; h < d.time; ++h)
      for (std::size_t u = 0; u < d.key; ++u)
        for (std::size_t v = 0; v < d.loc; ++v)
          out.push_back({rec.origin, h + 1, u, v, rec.result.values(h, u, v)});
  }
  return out;
}

std::vector<ForecastPoint> realized_points(const std::vector<ForecastPoint>& points,
                                           std::size_t realized, std::size_t warmup) {
  std::vector<ForecastPoint> out;
  for (const ForecastPoint& p : points)
    if (p.target() < realized && p.origin >= warmup) out.push_back(p);
  return out;
}

MetricReport evaluate(const std::vector<ForecastPoint>& points, const Tensor3& truth) {
  if (points.empty()) throw EvaluationError("forecast log is empty");
  const Dims& d = truth.dims();
  std::vector<std::string> gaps;
  std::size_t horizon = 0;
  for (const ForecastPoint& p : points) {
    if (p.step == 0) throw EvaluationError("forecast step must be >= 1");
    if (p.keyword >= d.key || p.location >= d.loc) {
      throw EvaluationError("forecast cell (" + std::to_string(p.keyword) + ", " +
                            std::to_string(p.location) + ") is outside the truth tensor");
    }
    if (p.target() >= d.time) {
      if (gaps.size() < 10) {
        gaps.push_back("origin " + std::to_string(p.origin) + " step " + std::to_string(p.step) +
                       " -> t=" + std::to_string(p.target()));
      }
    }
    horizon = std::max(horizon, p.step);
  }
  if (!gaps.empty()) {
    std::string msg = "no truth for forecast targets beyond t=" + std::to_string(d.time - 1) + ":";
    for (const std::string& g : gaps) msg += " [" + g + "]";
    throw EvaluationError(msg);
  }

  MetricReport report;
  report.horizon = horizon;
  report.per_horizon.assign(horizon, {});
  report.per_keyword.assign(d.key, {});
  report.per_keyword_horizon.assign(d.key, std::vector<ErrorStats>(horizon));
  std::vector<std::size_t> origins;
  for (const ForecastPoint& p : points) {
    const double err = p.value - truth(p.target(), p.keyword, p.location);
    accumulate(report.overall, err);
    accumulate(report.per_horizon[p.step - 1], err);
    accumulate(report.per_keyword[p.keyword], err);
    accumulate(report.per_keyword_horizon[p.keyword][p.step - 1], err);
    origins.push_back(p.origin);
  }
  std::sort(origins.begin(), origins.end());
  report.forecasts = static_cast<std::size_t>(std::unique(origins.begin(), origins.end()) - origins.begin());
  finish(report.overall);
  for (auto& s : report.per_horizon) finish(s);
  for (auto& s : report.per_keyword) finish(s);
  for (auto& row : report.per_keyword_horizon)
    for (auto& s : row) finish(s);
  return report;
}

MetricReport evaluate(const std::vector<ForecastRecord>& log, const Tensor3& truth) {
  return evaluate(flatten(log), truth);
}

std::string format_report(const MetricReport& report, const StreamMeta* meta) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "forecasts: " << report.forecasts << "  horizon L_f: " << report.horizon
      << "  (MAE / RMSE in units of 1e-2, normalized scale)\n";
  out << "overall  MAE " << std::setw(8) << report.overall.mae * 100.0 << "  RMSE " << std::setw(8)
      << report.overall.rmse * 100.0 << '\n';
  for (std::size_t h = 0; h < report.per_horizon.size(); ++h) {
    const ErrorStats& s = report.per_horizon[h];
    if (s.count == 0) continue;
    out << "h=" << std::setw(3) << h + 1 << "    MAE " << std::setw(8) << s.mae * 100.0 << "  RMSE "
        << std::setw(8) << s.rmse * 100.0 << '\n';
  }
  for (std::size_t u = 0; u < report.per_keyword.size(); ++u) {
    const ErrorStats& s = report.per_keyword[u];
    if (s.count == 0) continue;
    const std::string name =
        meta != nullptr && u < meta->keywords.size() ? meta->keywords[u] : "keyword " + std::to_string(u);
    out << name << "  MAE " << std::setw(8) << s.mae * 100.0 << "  RMSE " << std::setw(8)
        << s.rmse * 100.0 << '\n';
  }
  return out.str();
}

void write_forecast_log(const std::vector<ForecastPoint>& points, std::ostream& out) {
  const auto precision = out.precision(17);
  out << "origin,step,target,keyword,location,value\n";
  for (const ForecastPoint& p : points) {
    out << p.origin << ',' << p.step << ',' << p.target() << ',' << p.keyword << ',' << p.location
        << ',' << p.value << '\n';
  }
  out.precision(precision);
}

std::vector<ForecastPoint> read_forecast_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split(line).size() != 6 || split(line)[0] != "origin") {
    throw ParseError("row 1: forecast log header must be origin,step,target,keyword,location,value");
  }
  std::vector<ForecastPoint> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    ForecastPoint p;
    std::size_t target = 0;
    if (f.size() != 6 || !parse_number(f[0], p.origin) || !parse_number(f[1], p.step) ||
        !parse_number(f[2], target) || !parse_number(f[3], p.keyword) ||
        !parse_number(f[4], p.location) || !parse_number(f[5], p.value) || p.step == 0 ||
        target != p.target()) {
      throw ParseError("row " + std::to_string(row) + ": malformed forecast log entry");
    }
    out.push_back(p);
  }
  return out;
}

std::string serialize_model(const ModelDocument& doc) {
  if (doc.models.empty()) throw std::invalid_argument("cannot export an empty parameter set");
  Json models = Json::array();
  for (const ModelEntry& e : doc.models.models) models.push_back(model_json(e));
  const Json j{{"format", "rdstream-model"},
               {"version", 1},
               {"meta", meta_json(doc.meta)},
               {"normalization",
                Json{{"offset", doc.normalization.offset}, {"scale", doc.normalization.scale}}},
               {"active", doc.models.active},
               {"models", std::move(models)}};
  return j.dump(1) + "\n";
}

ModelDocument parse_model(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    if (j.at("format").get<std::string>() != "rdstream-model" || j.at("version").get<int>() != 1) {
      throw ParseError("not an rdstream model document (version 1)");
    }
    ModelDocument doc;
    doc.meta = meta_from(j.at("meta"));
    doc.normalization.offset = j.at("normalization").at("offset").get<double>();
    doc.normalization.scale = j.at("normalization").at("scale").get<double>();
    for (const Json& m : j.at("models")) doc.models.models.push_back(model_from(m));
    doc.models.active = j.at("active").get<std::size_t>();
    if (doc.models.models.empty() || doc.models.active >= doc.models.models.size()) {
      throw ParseError("model document has no valid active model");
    }
    for (const ModelEntry& e : doc.models.models) {
      if (e.model.keys() != doc.meta.keywords.size() || e.model.locations() != doc.meta.locations.size()) {
        throw ParseError("model shape does not match the metadata labels");
      }
    }
    return doc;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model document: ") + e.what());
  }
}

void export_model(const ModelDocument& doc, const fs::path& path) {
  const std::string text = serialize_model(doc);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

ModelDocument import_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_model(buffer.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<DiffusionEdge> diffusion_edges(const DiffusionTensor& diffusion) {
  std::vector<DiffusionEdge> edges;
  const double floor = kEdgeFloorFraction * diffusion.max();
  if (!(diffusion.max() > 0.0)) return edges;
  for (std::size_t i = 0; i < diffusion.dk(); ++i)
    for (std::size_t j = 0; j < diffusion.dl(); ++j)
      for (std::size_t jp = 0; jp < diffusion.dl(); ++jp)
        if (diffusion(i, j, jp) > floor) edges.push_back({i, jp, j, diffusion(i, j, jp)});
  return edges;
}

void export_plotdata(const ModelDocument& doc, const fs::path& dir, const StreamResult* run,
                     const Tensor3* truth) {
  if (doc.models.empty()) throw std::invalid_argument("cannot export an empty parameter set");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const Normalization& norm = doc.normalization;

  {
    std::ofstream out = open_out(dir / "trajectories.csv");
    out << "model,t,i,j,value\n";
    for (std::size_t m = 0; m < doc.models.models.size(); ++m) {
      const ModelParams& p = doc.models.models[m].model;
      Trajectory traj;
      try {
        traj = generate(p.trend.rd, p.window_length);
      } catch (const DivergenceError&) {
        continue;
      }
      const Dims& d = traj.core.dims();
      for (std::size_t t = 0; t < d.time; ++t)
        for (std::size_t i = 0; i < d.key; ++i)
          for (std::size_t j = 0; j < d.loc; ++j)
            out << m << ',' << p.window_start + t << ',' << i << ',' << j << ',' << traj.core(t, i, j) << '\n';
    }
  }
  {
    std::ofstream out = open_out(dir / "factors.csv");
    out << "model,factor,row,col,label,value\n";
    const auto emit = [&](std::size_t m, const char* name, const Matrix& w,
                          const std::vector<std::string>* labels) {
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) {
          const std::string label =
              labels != nullptr && static_cast<std::size_t>(c) < labels->size() ? (*labels)[c] : "";
          out << m << ',' << name << ',' << r << ',' << c << ',' << label << ',' << w(r, c) << '\n';
        }
    };
    for (std::size_t m = 0; m < doc.models.models.size(); ++m) {
      const ModelParams& p = doc.models.models[m].model;
      emit(m, "w_key", p.trend.w_key, &doc.meta.keywords);
      emit(m, "w_loc", p.trend.w_loc, &doc.meta.locations);
      emit(m, "growth", p.trend.rd.growth, nullptr);
      emit(m, "initial", p.trend.rd.initial, nullptr);
      emit(m, "s_time", p.seasonal.s_time, nullptr);
      emit(m, "s_key", p.seasonal.s_key, &doc.meta.keywords);
      emit(m, "s_loc", p.seasonal.s_loc, &doc.meta.locations);
    }
  }
  {
    std::ofstream out = open_out(dir / "diffusion_edges.csv");
    out << "model,group,from,to,strength\n";
    for (std::size_t m = 0; m < doc.models.models.size(); ++m)
      for (const DiffusionEdge& e : diffusion_edges(doc.models.models[m].model.trend.rd.diffusion))
        out << m << ',' << e.group << ',' << e.from << ',' << e.to << ',' << e.strength << '\n';
  }
  {
    std::ofstream out = open_out(dir / "switches.csv");
    out << "model,activated_at,window_start,dk,dl,ds,active\n";
    for (std::size_t m = 0; m < doc.models.models.size(); ++m) {
      const ModelEntry& e = doc.models.models[m];
      out << m << ',' << e.activated_at << ',' << e.model.window_start << ',' << e.model.ranks.dk
          << ',' << e.model.ranks.dl << ',' << e.model.ranks.ds << ','
          << (m == doc.models.active ? 1 : 0) << '\n';
    }
  }
  if (run == nullptr || truth == nullptr) return;

  const Dims& d = truth->dims();
  {
    // Fit of slice t: the initial model inside the first window, afterwards
    // the active model's reconstruction of the newest slice at each step.
    std::ofstream out = open_out(dir / "fit.csv");
    out << "t,keyword,location,truth,fit,residual\n";
    const auto row = [&](std::size_t t, std::size_t u, std::size_t v, double fit) {
      const double y = norm.denormalize((*truth)(t, u, v));
      const double f = norm.denormalize(fit);
      out << t << ',' << doc.meta.keywords[u] << ',' << doc.meta.locations[v] << ',' << y << ','
          << f << ',' << y - f << '\n';
    };
    const Tensor3 initial = reconstruct(run->init.model).total();
    for (std::size_t t = 0; t < initial.dims().time && t < d.time; ++t)
      for (std::size_t u = 0; u < d.key; ++u)
        for (std::size_t v = 0; v < d.loc; ++v) row(t, u, v, initial(t, u, v));
    for (const StepRecord& s : run->steps) {
      const std::size_t t = s.now - 1;
      if (t >= d.time) continue;
      for (std::size_t u = 0; u < d.key; ++u)
        for (std::size_t v = 0; v < d.loc; ++v) row(t, u, v, s.last_fit[u * d.loc + v]);
    }
  }
  {
    std::ofstream out = open_out(dir / "forecasts.csv");
    out << "origin,step,target,keyword,location,forecast,truth,model\n";
    for (const ForecastRecord& rec : run->forecasts) {
      const Dims& fd = rec.result.values.dims();
      for (std::size_t h = 0; h < fd.time; ++h)
        for (std::size_t u = 0; u < fd.key; ++u)
          for (std::size_t v = 0; v < fd.loc; ++v) {
            const std::size_t target = rec.origin + h;
            out << rec.origin << ',' << h + 1 << ',' << target << ',' << doc.meta.keywords[u] << ','
                << doc.meta.locations[v] << ',' << norm.denormalize(rec.result.values(h, u, v)) << ',';
            if (target < d.time) out << norm.denormalize((*truth)(target, u, v));
            out << ',' << rec.result.provenance[h] << '\n';
          }
    }
  }
}

}  // namespace rdstream
