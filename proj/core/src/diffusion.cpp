#include "rdstream/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rdstream/error.hpp"

namespace rdstream {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

// Packs the free parameters in the order A (row-major), off-diagonal D,
// then w0 (row-major).
class Packing {
 public:
  Packing(std::size_t dk, std::size_t dl, const LmOptions& options)
      : dk_(dk), dl_(dl), rates_(options.fit_rates), initial_(options.fit_initial) {}

  std::size_t size() const {
    std::size_t n = 0;
    if (rates_) n += dk_ * dl_ + dk_ * dl_ * (dl_ - 1);
    if (initial_) n += dk_ * dl_;
    return n;
  }

  Vector pack(const RDParams& p) const {
    Vector out(idx(size()));
    Index k = 0;
    if (rates_) {
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j) out(k++) = p.growth(idx(i), idx(j));
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j)
          for (std::size_t jp = 0; jp < dl_; ++jp)
            if (jp != j) out(k++) = p.diffusion(i, j, jp);
    }
    if (initial_) {
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j) out(k++) = p.initial(idx(i), idx(j));
    }
    return out;
  }

  RDParams unpack(const Vector& x, RDParams base) const {
    Index k = 0;
    if (rates_) {
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j) base.growth(idx(i), idx(j)) = x(k++);
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j)
          for (std::size_t jp = 0; jp < dl_; ++jp)
            if (jp != j) base.diffusion(i, j, jp) = x(k++);
    }
    if (initial_) {
      for (std::size_t i = 0; i < dk_; ++i)
        for (std::size_t j = 0; j < dl_; ++j) base.initial(idx(i), idx(j)) = x(k++);
    }
    return base;
  }

  // Entries constrained to [0, inf).
  std::vector<bool> nonnegative() const {
    std::vector<bool> out;
    out.reserve(size());
    if (rates_) {
      out.insert(out.end(), dk_ * dl_, false);
      out.insert(out.end(), dk_ * dl_ * (dl_ - 1), true);
    }
    if (initial_) out.insert(out.end(), dk_ * dl_, true);
    return out;
  }

 private:
  std::size_t dk_;
  std::size_t dl_;
  bool rates_;
  bool initial_;
};

void derivative_into(const double* w, const RDParams& p, double* out) {
  const std::size_t dk = p.dk();
  const std::size_t dl = p.dl();
  for (std::size_t i = 0; i < dk; ++i) {
    const double* row = w + i * dl;
    for (std::size_t j = 0; j < dl; ++j) {
      double d = p.growth(idx(i), idx(j)) * row[j];
      for (std::size_t jp = 0; jp < dl; ++jp) {
        if (jp != j) d += p.diffusion(i, j, jp) * (row[jp] - row[j]);
      }
      out[i * dl + j] = d;
    }
  }
}

// Squared observed-space residual of a trajectory.
double residual_sq(const Tensor3& core, const Tensor3& target, const Matrix& w_key,
                   const Matrix& w_loc) {
  const Tensor3 fit = expand(core, w_key, w_loc);
  double s = 0.0;
  const auto a = fit.data();
  const auto b = target.data();
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double e = a[n] - b[n];
    s += e * e;
  }
  return s;
}

Matrix jacobian(const Packing& packing, const RDParams& params, const Vector& x,
                const Tensor3& base, std::size_t length, double step) {
  const auto rows = static_cast<Index>(base.size());
  Matrix jac = Matrix::Zero(rows, idx(packing.size()));
  for (Index m = 0; m < jac.cols(); ++m) {
    Vector xp = x;
    const double h = step * (1.0 + std::abs(x(m)));
    xp(m) += h;
    try {
      const Trajectory perturbed = generate(packing.unpack(xp, params), length);
      const auto pd = perturbed.core.data();
      const auto bd = base.data();
      for (Index r = 0; r < rows; ++r) jac(r, m) = (pd[static_cast<std::size_t>(r)] -
                                                    bd[static_cast<std::size_t>(r)]) / h;
    } catch (const DivergenceError&) {
      // Leave the column at zero; the damped step will not move along it.
    }
  }
  return jac;
}

}  // namespace

std::size_t DiffusionTensor::count_nonzero() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](double x) { return x != 0.0; }));
}

double DiffusionTensor::max() const noexcept {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

RDParams RDParams::zero(std::size_t dk, std::size_t dl) {
  return RDParams{Matrix::Zero(idx(dk), idx(dl)), DiffusionTensor(dk, dl),
                  Matrix::Zero(idx(dk), idx(dl))};
}

void RDParams::validate() const {
  const std::size_t k = dk();
  const std::size_t l = dl();
  if (k == 0 || l == 0) throw DimensionError("reaction-diffusion ranks must be >= 1");
  if (diffusion.dk() != k || diffusion.dl() != l ||
      initial.rows() != growth.rows() || initial.cols() != growth.cols()) {
    throw DimensionError("reaction-diffusion parameter shapes disagree");
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      if (diffusion(i, j, j) != 0.0) {
        throw std::invalid_argument("diffusion diagonal must be zero");
      }
      for (std::size_t jp = 0; jp < l; ++jp) {
        if (!(diffusion(i, j, jp) >= 0.0)) {
          throw std::invalid_argument("diffusion strengths must be nonnegative");
        }
      }
      if (!(initial(idx(i), idx(j)) >= 0.0)) {
        throw std::invalid_argument("initial state must be nonnegative");
      }
    }
  }
  if (!growth.allFinite()) throw std::invalid_argument("growth rates must be finite");
}

Matrix Trajectory::state(std::size_t t) const {
  const Dims& d = core.dims();
  Matrix out(idx(d.key), idx(d.loc));
  for (std::size_t i = 0; i < d.key; ++i)
    for (std::size_t j = 0; j < d.loc; ++j) out(idx(i), idx(j)) = core(t, i, j);
  return out;
}

Matrix rd_derivative(const Matrix& state, const RDParams& params) {
  if (state.rows() != params.growth.rows() || state.cols() != params.growth.cols()) {
    throw DimensionError("state shape does not match the reaction-diffusion ranks");
  }
  // Row-major scratch so the kernel can share the integrator's layout.
  const std::size_t n = params.dk() * params.dl();
  std::vector<double> w(n), d(n);
  for (std::size_t i = 0; i < params.dk(); ++i)
    for (std::size_t j = 0; j < params.dl(); ++j) w[i * params.dl() + j] = state(idx(i), idx(j));
  derivative_into(w.data(), params, d.data());
  Matrix out(state.rows(), state.cols());
  for (std::size_t i = 0; i < params.dk(); ++i)
    for (std::size_t j = 0; j < params.dl(); ++j) out(idx(i), idx(j)) = d[i * params.dl() + j];
  return out;
}

Trajectory generate(const RDParams& params, std::size_t length) {
  if (length == 0) throw DimensionError("trajectory length must be >= 1");
  const std::size_t dk = params.dk();
  const std::size_t dl = params.dl();
  const std::size_t n = dk * dl;
  Trajectory traj{Tensor3({length, dk, dl})};
  auto first = traj.core.slice(0);
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t j = 0; j < dl; ++j) first[i * dl + j] = params.initial(idx(i), idx(j));

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  for (std::size_t t = 1; t < length; ++t) {
    const double* w = traj.core.slice(t - 1).data();
    derivative_into(w, params, k1.data());
    for (std::size_t m = 0; m < n; ++m) tmp[m] = w[m] + 0.5 * k1[m];
    derivative_into(tmp.data(), params, k2.data());
    for (std::size_t m = 0; m < n; ++m) tmp[m] = w[m] + 0.5 * k2[m];
    derivative_into(tmp.data(), params, k3.data());
    for (std::size_t m = 0; m < n; ++m) tmp[m] = w[m] + k3[m];
    derivative_into(tmp.data(), params, k4.data());
    double* next = traj.core.slice(t).data();
    for (std::size_t m = 0; m < n; ++m) {
      next[m] = w[m] + (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]) / 6.0;
      if (!std::isfinite(next[m]) || std::abs(next[m]) > kDivergenceLimit) {
        throw DivergenceError(t, "reaction-diffusion state diverged at step " + std::to_string(t));
      }
    }
  }
  return traj;
}

std::size_t parameter_count(std::size_t dk, std::size_t dl, const LmOptions& options) {
  return Packing(dk, dl, options).size();
}

Matrix fd_jacobian(const RDParams& params, std::size_t length, double step,
                   const LmOptions& options) {
  const Packing packing(params.dk(), params.dl(), options);
  const Trajectory base = generate(params, length);
  return jacobian(packing, params, packing.pack(params), base.core, length, step);
}

LmResult fit_lm(const Tensor3& target, const Matrix& w_key, const Matrix& w_loc,
                const RDParams& init, const LmOptions& options) {
  init.validate();
  const std::size_t dk = init.dk();
  const std::size_t dl = init.dl();
  const std::size_t length = target.dims().time;
  if (static_cast<std::size_t>(w_key.rows()) != dk || static_cast<std::size_t>(w_loc.rows()) != dl ||
      static_cast<std::size_t>(w_key.cols()) != target.dims().key ||
      static_cast<std::size_t>(w_loc.cols()) != target.dims().loc) {
    throw DimensionError("fit_lm: factor shapes do not match the target and ranks");
  }

  const Packing packing(dk, dl, options);
  const auto nonneg = packing.nonnegative();
  const auto p = static_cast<Index>(packing.size());
  const std::size_t q = dk * dl;

  // Metric of the latent-to-observed map: <expand(a), expand(b)> = a' M b per slice.
  const Matrix gk = w_key * w_key.transpose();
  const Matrix gl = w_loc * w_loc.transpose();
  Matrix metric(idx(q), idx(q));
  for (std::size_t i = 0; i < dk; ++i)
    for (std::size_t j = 0; j < dl; ++j)
      for (std::size_t ip = 0; ip < dk; ++ip)
        for (std::size_t jp = 0; jp < dl; ++jp)
          metric(idx(i * dl + j), idx(ip * dl + jp)) = gk(idx(i), idx(ip)) * gl(idx(j), idx(jp));

  LmResult result;
  result.params = init;
  Vector x = packing.pack(init);
  Trajectory traj = generate(init, length);
  double cost = residual_sq(traj.core, target, w_key, w_loc);
  result.initial_residual_norm = std::sqrt(cost);
  result.residual_norm = result.initial_residual_norm;

  const double floor = 1e-12 * std::max(1.0, target.norm());
  if (p == 0 || std::sqrt(cost) <= floor) return result;

  double damping = options.initial_damping;
  bool accepted_any = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    const Matrix jac = jacobian(packing, result.params, x, traj.core, length, options.fd_step);

    Tensor3 error = expand(traj.core, w_key, w_loc);
    error -= target;
    const Tensor3 projected = project(error, w_key, w_loc);
    const Eigen::Map<const Vector> pe(projected.data().data(), idx(projected.size()));

    Vector gradient = jac.transpose() * pe;
    Matrix hessian = Matrix::Zero(p, p);
    for (std::size_t t = 0; t < length; ++t) {
      const auto block = jac.middleRows(idx(t * q), idx(q));
      hessian.noalias() += block.transpose() * (metric * block);
    }
    Vector diag = hessian.diagonal();
    const double diag_floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    for (Index m = 0; m < p; ++m) diag(m) = std::max(diag(m), diag_floor);

    bool accepted = false;
    bool stop = false;
    while (!accepted) {
      Matrix lhs = hessian;
      lhs.diagonal() += damping * diag;
      const Vector delta = lhs.ldlt().solve(-gradient);
      Vector candidate = x + delta;
      for (Index m = 0; m < p; ++m) {
        if (nonneg[static_cast<std::size_t>(m)]) candidate(m) = std::max(candidate(m), 0.0);
      }
      bool usable = delta.allFinite();
      double trial_cost = cost;
      Trajectory trial;
      if (usable) {
        try {
          trial = generate(packing.unpack(candidate, result.params), length);
          trial_cost = residual_sq(trial.core, target, w_key, w_loc);
        } catch (const DivergenceError&) {
          usable = false;
        }
      }
      if (usable && trial_cost < cost) {
        const double before = std::sqrt(cost);
        x = candidate;
        result.params = packing.unpack(candidate, result.params);
        traj = std::move(trial);
        cost = trial_cost;
        damping = std::max(damping / 10.0, 1e-12);
        accepted = true;
        accepted_any = true;
        const double after = std::sqrt(cost);
        if (before - after < options.tolerance * before || after <= floor) stop = true;
      } else {
        damping *= 10.0;
        if (damping > 1e16) {
          stop = true;
          break;
        }
      }
    }
    if (stop) break;
  }
  result.residual_norm = std::sqrt(cost);
  result.no_progress = !accepted_any;
  return result;
}

LmResult fit_lm(const Tensor3& core_target, const RDParams& init, const LmOptions& options) {
  const Matrix eye_k = Matrix::Identity(idx(init.dk()), idx(init.dk()));
  const Matrix eye_l = Matrix::Identity(idx(init.dl()), idx(init.dl()));
  return fit_lm(core_target, eye_k, eye_l, init, options);
}

}  // namespace rdstream
