#include "rdstream/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

// Loadings: member u of group u * d / n gets a weight in [0.6, 1], others 0.
Matrix grouped(std::size_t d, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.6, 1.0);
  Matrix w = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t u = 0; u < n; ++u) w(static_cast<Eigen::Index>(u * d / n), static_cast<Eigen::Index>(u)) = weight(rng);
  return w;
}

}  // namespace

SyntheticStream make_synthetic(const SyntheticSpec& spec) {
  const Ranks& r = spec.ranks;
  if (r.dk == 0 || r.dl == 0 || r.dk > spec.keys || r.dl > spec.locs || spec.length < 2) {
    throw DimensionError("synthetic ranks must lie in [1, k] x [1, l]");
  }
  std::mt19937_64 rng(spec.seed);
  SyntheticStream out;
  out.trend.w_key = grouped(r.dk, spec.keys, rng);
  out.trend.w_loc = grouped(r.dl, spec.locs, rng);

  RDParams& rd = out.trend.rd;
  rd = RDParams::zero(r.dk, r.dl);
  std::uniform_real_distribution<double> level(0.6, 1.0);
  for (std::size_t i = 0; i < r.dk; ++i)
    for (std::size_t j = 0; j < r.dl; ++j) {
      const double sign = (i + j) % 2 == 0 ? 1.0 : -1.0;
      rd.growth(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sign * spec.growth * (1.0 + 0.5 * static_cast<double>(j));
      rd.initial(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = level(rng);
    }
  if (r.dl > 1) rd.diffusion(0, 1, 0) = spec.diffusion;
  out.shifted = rd;
  out.shifted.growth(0, 0) = -rd.growth(0, 0);

  // Latent trajectory with the regime change applied at shift_at.
  const std::size_t n = spec.length;
  const std::size_t split = spec.shift_at ? std::min(*spec.shift_at, n) : n;
  Tensor3 core(Dims{n, r.dk, r.dl});
  const Trajectory before = generate(rd, std::max<std::size_t>(split, 1));
  for (std::size_t t = 0; t < split; ++t) {
    const auto src = before.core.slice(t);
    std::copy(src.begin(), src.end(), core.slice(t).begin());
  }
  if (split < n) {
    RDParams after = out.shifted;
    after.initial = split > 0 ? Matrix(generate(rd, split + 1).state(split)) : rd.initial;
    const Trajectory tail = generate(after, n - split);
    for (std::size_t t = split; t < n; ++t) {
      const auto src = tail.core.slice(t - split);
      std::copy(src.begin(), src.end(), core.slice(t).begin());
    }
  }
  Tensor3 clean = expand(core, out.trend.w_key, out.trend.w_loc);
  Tensor3 trend_part = clean;
  Tensor3 seasonal_part(clean.dims());

  if (r.ds > 0) {
    std::uniform_real_distribution<double> load(0.5, 1.0);
    const auto ds = static_cast<Eigen::Index>(r.ds);
    SeasonalParams s{Matrix::Zero(ds, static_cast<Eigen::Index>(n)),
                     Matrix::Zero(ds, static_cast<Eigen::Index>(spec.keys)),
                     Matrix::Zero(ds, static_cast<Eigen::Index>(spec.locs)), spec.period};
    for (std::size_t c = 0; c < r.ds; ++c) {
      const double harmonic = static_cast<double>(c + 1);
      for (std::size_t t = 0; t < n; ++t) {
        s.s_time(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
            spec.seasonal_amplitude / harmonic *
            std::sin(2.0 * std::numbers::pi * harmonic * static_cast<double>(t) /
                     static_cast<double>(spec.period));
      }
      for (std::size_t u = 0; u < spec.keys; ++u) s.s_key(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(u)) = load(rng);
      for (std::size_t v = 0; v < spec.locs; ++v) s.s_loc(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v)) = load(rng);
    }
    seasonal_part = reconstruct_seasonal(s);
    clean += seasonal_part;
  }

  Tensor3 noisy = clean;
  std::normal_distribution<double> noise(0.0, spec.noise);
  for (double& x : noisy.data()) x += noise(rng);
  // Spikes spread evenly over the stream, cycling through cells.
  for (std::size_t s = 0; s < spec.spikes; ++s) {
    const std::size_t t = (2 * s + 1) * n / (2 * spec.spikes);
    const std::size_t u = (s * 5 + 1) % spec.keys;
    const std::size_t v = (s * 3 + 2) % spec.locs;
    noisy(t, u, v) += spec.spike_height;
    out.spikes.push_back({t, u, v});
  }

  // Scale by the maximum only; the raw stream is positive by construction so
  // no offset enters the trend.
  const double lo = std::min(noisy.min(), 0.0);
  const double hi = noisy.max();
  const double scale = hi > lo ? hi - lo : 1.0;
  for (double& x : noisy.data()) x = (x - lo) / scale;
  for (double& x : clean.data()) x = (x - lo) / scale;
  for (double& x : trend_part.data()) x = (x - lo) / scale;
  seasonal_part *= 1.0 / scale;
  out.trend_part = std::move(trend_part);
  out.seasonal_part = std::move(seasonal_part);
  out.stream = std::move(noisy);
  out.clean = std::move(clean);
  return out;
}

}  // namespace rdstream
