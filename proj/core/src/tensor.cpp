#include "rdstream/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rdstream/error.hpp"

namespace rdstream {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::kDimension: return "dimension";
    case ErrorCategory::kInitialization: return "initialization";
    case ErrorCategory::kDivergence: return "divergence";
    case ErrorCategory::kParse: return "parse";
    case ErrorCategory::kEvaluation: return "evaluation";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kConfig: return "config";
  }
  return "unknown";
}

namespace {

std::string dims_string(const Dims& d) {
  return "(" + std::to_string(d.time) + ", " + std::to_string(d.key) + ", " +
         std::to_string(d.loc) + ")";
}

void require_valid(const Dims& dims) {
  if (dims.time == 0 || dims.key == 0 || dims.loc == 0) {
    throw DimensionError("tensor extents must be >= 1, got " + dims_string(dims));
  }
}

void require_same_shape(const Tensor3& a, const Tensor3& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError("tensor shape mismatch " + dims_string(a.dims()) + " vs " +
                         dims_string(b.dims()));
  }
}

Dims with_extent(Dims dims, Mode mode, std::size_t extent) {
  switch (mode) {
    case Mode::kTime: dims.time = extent; break;
    case Mode::kKey: dims.key = extent; break;
    case Mode::kLoc: dims.loc = extent; break;
  }
  return dims;
}

// Maps (row, col) of the mode unfolding to (t, u, v).
struct UnfoldIndex {
  Mode mode;
  Dims dims;

  std::size_t cols() const {
    switch (mode) {
      case Mode::kTime: return dims.key * dims.loc;
      case Mode::kKey: return dims.time * dims.loc;
      case Mode::kLoc: return dims.time * dims.key;
    }
    return 0;
  }

  void to_tensor(std::size_t row, std::size_t col, std::size_t& t, std::size_t& u,
                 std::size_t& v) const {
    switch (mode) {
      case Mode::kTime:
        t = row, u = col / dims.loc, v = col % dims.loc;
        break;
      case Mode::kKey:
        u = row, t = col / dims.loc, v = col % dims.loc;
        break;
      case Mode::kLoc:
        v = row, t = col / dims.key, u = col % dims.key;
        break;
    }
  }
};

}  // namespace

std::size_t Dims::extent(Mode mode) const noexcept {
  switch (mode) {
    case Mode::kTime: return time;
    case Mode::kKey: return key;
    case Mode::kLoc: return loc;
  }
  return 0;
}

Tensor3::Tensor3(Dims dims, double fill) : dims_(dims) {
  require_valid(dims);
  data_.assign(dims.count(), fill);
}

Tensor3::Tensor3(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  require_valid(dims);
  if (data_.size() != dims.count()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match dims " + dims_string(dims));
  }
}

std::span<const double> Tensor3::slice(std::size_t t) const {
  const std::size_t n = dims_.key * dims_.loc;
  return std::span<const double>(data_).subspan(t * n, n);
}

std::span<double> Tensor3::slice(std::size_t t) {
  const std::size_t n = dims_.key * dims_.loc;
  return std::span<double>(data_).subspan(t * n, n);
}

Tensor3 Tensor3::time_range(std::size_t begin, std::size_t count) const {
  if (count == 0 || begin + count > dims_.time) {
    throw DimensionError("time range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside tensor of length " +
                         std::to_string(dims_.time));
  }
  const std::size_t n = dims_.key * dims_.loc;
  std::vector<double> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * n),
                          data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  return Tensor3({count, dims_.key, dims_.loc}, std::move(out));
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor3& Tensor3::operator*=(double scale) {
  for (double& x : data_) x *= scale;
  return *this;
}

double Tensor3::squared_norm() const noexcept {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return s;
}

double Tensor3::norm() const noexcept { return std::sqrt(squared_norm()); }

bool Tensor3::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::size_t Tensor3::count_nonzero() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](double x) { return x != 0.0; }));
}

double Tensor3::min() const {
  if (data_.empty()) throw DimensionError("min of an empty tensor");
  return *std::min_element(data_.begin(), data_.end());
}

double Tensor3::max() const {
  if (data_.empty()) throw DimensionError("max of an empty tensor");
  return *std::max_element(data_.begin(), data_.end());
}

Matrix unfold(const Tensor3& tensor, Mode mode) {
  const UnfoldIndex index{mode, tensor.dims()};
  Matrix out(static_cast<Eigen::Index>(tensor.extent(mode)),
             static_cast<Eigen::Index>(index.cols()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      std::size_t t = 0, u = 0, v = 0;
      index.to_tensor(static_cast<std::size_t>(r), static_cast<std::size_t>(c), t, u, v);
      out(r, c) = tensor(t, u, v);
    }
  }
  return out;
}

Tensor3 fold(const Matrix& matrix, Mode mode, const Dims& dims) {
  require_valid(dims);
  const UnfoldIndex index{mode, dims};
  if (static_cast<std::size_t>(matrix.rows()) != dims.extent(mode) ||
      static_cast<std::size_t>(matrix.cols()) != index.cols()) {
    throw DimensionError("cannot fold " + std::to_string(matrix.rows()) + "x" +
                         std::to_string(matrix.cols()) + " matrix into " + dims_string(dims));
  }
  Tensor3 out(dims);
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      std::size_t t = 0, u = 0, v = 0;
      index.to_tensor(static_cast<std::size_t>(r), static_cast<std::size_t>(c), t, u, v);
      out(t, u, v) = matrix(r, c);
    }
  }
  return out;
}

Tensor3 mode_product(const Tensor3& tensor, const Matrix& factor, Mode mode, Contract contract) {
  const auto contracted = static_cast<std::size_t>(
      contract == Contract::kCols ? factor.cols() : factor.rows());
  const auto produced = static_cast<std::size_t>(
      contract == Contract::kCols ? factor.rows() : factor.cols());
  if (contracted != tensor.extent(mode)) {
    throw DimensionError("mode product: factor contracts " + std::to_string(contracted) +
                         " entries but the tensor mode has " +
                         std::to_string(tensor.extent(mode)));
  }
  const Matrix unfolded = unfold(tensor, mode);
  const Matrix product =
      contract == Contract::kCols ? Matrix(factor * unfolded) : Matrix(factor.transpose() * unfolded);
  return fold(product, mode, with_extent(tensor.dims(), mode, produced));
}

Tensor3 expand(const Tensor3& core, const Matrix& w_key, const Matrix& w_loc) {
  const Dims& cd = core.dims();
  if (static_cast<std::size_t>(w_key.rows()) != cd.key ||
      static_cast<std::size_t>(w_loc.rows()) != cd.loc) {
    throw DimensionError("expand: factor ranks do not match the core " + dims_string(cd));
  }
  const auto k = static_cast<std::size_t>(w_key.cols());
  const auto l = static_cast<std::size_t>(w_loc.cols());
  Tensor3 out({cd.time, k, l});
  std::vector<double> partial(k * cd.loc);
  for (std::size_t t = 0; t < cd.time; ++t) {
    // partial(u, j) = sum_i W_key(i, u) core(t, i, j)
    std::fill(partial.begin(), partial.end(), 0.0);
    for (std::size_t i = 0; i < cd.key; ++i) {
      for (std::size_t u = 0; u < k; ++u) {
        const double w = w_key(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u));
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < cd.loc; ++j) partial[u * cd.loc + j] += w * core(t, i, j);
      }
    }
    auto slice = out.slice(t);
    for (std::size_t u = 0; u < k; ++u) {
      for (std::size_t j = 0; j < cd.loc; ++j) {
        const double p = partial[u * cd.loc + j];
        if (p == 0.0) continue;
        for (std::size_t v = 0; v < l; ++v) {
          slice[u * l + v] += p * w_loc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(v));
        }
      }
    }
  }
  return out;
}

Tensor3 project(const Tensor3& observed, const Matrix& w_key, const Matrix& w_loc) {
  const Dims& od = observed.dims();
  if (static_cast<std::size_t>(w_key.cols()) != od.key ||
      static_cast<std::size_t>(w_loc.cols()) != od.loc) {
    throw DimensionError("project: factor widths do not match " + dims_string(od));
  }
  const auto dk = static_cast<std::size_t>(w_key.rows());
  const auto dl = static_cast<std::size_t>(w_loc.rows());
  Tensor3 out({od.time, dk, dl});
  std::vector<double> partial(od.key * dl);
  for (std::size_t t = 0; t < od.time; ++t) {
    // partial(u, j) = sum_v x(t, u, v) W_loc(j, v)
    const auto slice = observed.slice(t);
    for (std::size_t u = 0; u < od.key; ++u) {
      for (std::size_t j = 0; j < dl; ++j) {
        double s = 0.0;
        for (std::size_t v = 0; v < od.loc; ++v) {
          s += slice[u * od.loc + v] * w_loc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(v));
        }
        partial[u * dl + j] = s;
      }
    }
    for (std::size_t i = 0; i < dk; ++i) {
      for (std::size_t j = 0; j < dl; ++j) {
        double s = 0.0;
        for (std::size_t u = 0; u < od.key; ++u) {
          s += w_key(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(u)) * partial[u * dl + j];
        }
        out(t, i, j) = s;
      }
    }
  }
  return out;
}

}  // namespace rdstream
