#include "rdstream/mdl.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

double log2_size(std::size_t n) { return n == 0 ? 0.0 : std::log2(static_cast<double>(n)); }

std::size_t nonzeros(const Matrix& m) {
  return static_cast<std::size_t>((m.array() != 0.0).count());
}

}  // namespace

double log_star(std::size_t n) {
  if (n == 0) return 1.0;
  double bits = std::log2(2.865064);
  double x = std::log2(static_cast<double>(n));
  while (x > 0.0) {
    bits += x;
    x = std::log2(x);
  }
  return bits;
}

double structure_cost(std::size_t nonzeros, double index_bits) {
  if (nonzeros == 0) return log_star(0);
  return static_cast<double>(nonzeros) * (index_bits + kFloatBits) + log_star(nonzeros);
}

double outlier_entry_bits(std::size_t stream_length, std::size_t keys, std::size_t locs) {
  return log2_size(stream_length) + log2_size(keys) + log2_size(locs) + kFloatBits;
}

ModelCostTerms model_cost_terms(const ModelParams& m) {
  const double k = log2_size(m.keys());
  const double l = log2_size(m.locations());
  const double dk = log2_size(m.trend.rd.dk());
  const double dl = log2_size(m.trend.rd.dl());
  const double ds = log2_size(m.seasonal.rank());
  const double lc = log2_size(m.window_length);

  ModelCostTerms terms;
  terms.w_key = structure_cost(nonzeros(m.trend.w_key), dk + k);
  terms.w_loc = structure_cost(nonzeros(m.trend.w_loc), dl + l);
  terms.growth = structure_cost(nonzeros(m.trend.rd.growth), dk + dl);
  terms.diffusion = structure_cost(m.trend.rd.diffusion.count_nonzero(), dk + 2.0 * dl);
  terms.s_time = structure_cost(nonzeros(m.seasonal.s_time), ds + lc);
  terms.s_key = structure_cost(nonzeros(m.seasonal.s_key), ds + k);
  terms.s_loc = structure_cost(nonzeros(m.seasonal.s_loc), ds + l);
  const std::size_t outliers = m.outliers.empty() ? 0 : m.outliers.count_nonzero();
  terms.outliers = structure_cost(
      outliers, outlier_entry_bits(m.stream_length, m.keys(), m.locations()) - kFloatBits);
  return terms;
}

double model_cost(const ModelParams& model) { return model_cost_terms(model).sum(); }

EncodingModel fit_encoding(const Tensor3& residual, const Tensor3& exclude, double quantization_step) {
  const bool masked = !exclude.empty();
  if (masked && exclude.dims() != residual.dims()) {
    throw DimensionError("encoding mask shape does not match the residual");
  }
  const auto r = residual.data();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (masked && exclude.data()[i] != 0.0) continue;
    sum += r[i];
    ++count;
  }
  EncodingModel enc;
  enc.quantization_step = quantization_step;
  if (count == 0) {
    enc.mu = 0.0;
    enc.sigma = kSigmaFloor;
    return enc;
  }
  enc.mu = sum / static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (masked && exclude.data()[i] != 0.0) continue;
    const double e = r[i] - enc.mu;
    ss += e * e;
  }
  enc.sigma = std::max(std::sqrt(ss / static_cast<double>(count)), kSigmaFloor);
  return enc;
}

double element_bits(double residual, const EncodingModel& enc) {
  const double z = (residual - enc.mu) / enc.sigma;
  const double bits = -std::log2(enc.quantization_step) +
                      std::log2(enc.sigma * std::sqrt(2.0 * std::numbers::pi)) +
                      0.5 * z * z / std::numbers::ln2;
  return std::max(0.0, bits);
}

double coding_cost(const Tensor3& residual, const EncodingModel& enc) {
  double bits = 0.0;
  for (double r : residual.data()) bits += element_bits(r, enc);
  return bits;
}

CostBreakdown total_cost(const Tensor3& window, const FullParamSet& models) {
  if (models.empty()) throw std::logic_error("total cost of an empty full parameter set");
  CostBreakdown cost;
  for (const ModelEntry& entry : models.models) cost.model_bits += model_cost(entry.model);
  const ModelParams& active = models.active_model();
  Tensor3 residual = window;
  residual -= reconstruct(active).total();
  cost.coding_bits = coding_cost(residual, active.encoding);
  cost.total_bits = cost.model_bits + cost.coding_bits;
  return cost;
}

Tensor3 sparsify_outliers(const Tensor3& residual, std::size_t stream_length,
                          const EncodingModel& enc) {
  const Dims& d = residual.dims();
  const double entry_bits = outlier_entry_bits(stream_length, d.key, d.loc);
  const auto r = residual.data();
  const double bits_at_zero = element_bits(0.0, enc);

  std::vector<double> saving(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) saving[i] = element_bits(r[i], enc) - bits_at_zero;

  std::vector<std::size_t> order;
  order.reserve(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (saving[i] > entry_bits) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return saving[a] > saving[b]; });

  // Pick the prefix length maximizing the net saving; the earliest maximum
  // keeps the tensor as sparse as possible.
  double best = 0.0;
  double running = 0.0;
  std::size_t keep = 0;
  for (std::size_t m = 1; m <= order.size(); ++m) {
    running += saving[order[m - 1]] - entry_bits;
    const double net = running - (log_star(m) - log_star(0));
    if (net > best) {
      best = net;
      keep = m;
    }
  }

  Tensor3 outliers(d);
  for (std::size_t m = 0; m < keep; ++m) outliers.data()[order[m]] = r[order[m]];
  return outliers;
}

}  // namespace rdstream
