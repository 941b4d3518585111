#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rdstream {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Mode { kTime = 0, kKey = 1, kLoc = 2 };

/// Which index of the factor matrix a mode product sums over.
///
/// kCols is the textbook n-mode product: the tensor mode has size M.cols() and
/// is replaced by M.rows(). kRows contracts against the row index instead, so
/// a d x k factor expands a d-sized latent mode into k observed entries
/// (observed u receives sum_i M(i, u) * core_i).
enum class Contract { kCols, kRows };

struct Dims {
  std::size_t time = 0;
  std::size_t key = 0;
  std::size_t loc = 0;

  std::size_t extent(Mode mode) const noexcept;
  std::size_t count() const noexcept { return time * key * loc; }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense third-order tensor indexed (time, keyword, location).
///
/// Storage is time-major: element (t, u, v) lives at (t * key + u) * loc + v,
/// so each time slice is one contiguous block and appending a slice is an
/// append. A default-constructed tensor is empty; every other tensor has all
/// extents >= 1.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Dims dims, double fill = 0.0);
  Tensor3(Dims dims, std::vector<double> data);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t extent(Mode mode) const noexcept { return dims_.extent(mode); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t t, std::size_t u, std::size_t v) {
    return data_[(t * dims_.key + u) * dims_.loc + v];
  }
  double operator()(std::size_t t, std::size_t u, std::size_t v) const {
    return data_[(t * dims_.key + u) * dims_.loc + v];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// Contiguous view of time slice t (key x loc values, loc fastest).
  std::span<const double> slice(std::size_t t) const;
  std::span<double> slice(std::size_t t);

  /// Copy of time slices [begin, begin + count).
  Tensor3 time_range(std::size_t begin, std::size_t count) const;

  Tensor3& operator+=(const Tensor3& other);
  Tensor3& operator-=(const Tensor3& other);
  Tensor3& operator*=(double scale);

  friend Tensor3 operator+(Tensor3 lhs, const Tensor3& rhs) { return lhs += rhs; }
  friend Tensor3 operator-(Tensor3 lhs, const Tensor3& rhs) { return lhs -= rhs; }
  friend Tensor3 operator*(Tensor3 lhs, double scale) { return lhs *= scale; }
  friend bool operator==(const Tensor3&, const Tensor3&) = default;

  double squared_norm() const noexcept;
  double norm() const noexcept;
  bool all_finite() const noexcept;
  std::size_t count_nonzero() const noexcept;
  double min() const;
  double max() const;

 private:
  Dims dims_{};
  std::vector<double> data_;
};

/// Matricization along `mode`. Rows index the mode; columns run over the two
/// remaining modes in the order time < key < loc, row-major (the later mode
/// varies fastest). For mode kKey, column = t * loc + v.
Matrix unfold(const Tensor3& tensor, Mode mode);

/// Inverse of unfold. Throws DimensionError when the shape disagrees.
Tensor3 fold(const Matrix& matrix, Mode mode, const Dims& dims);

Tensor3 mode_product(const Tensor3& tensor, const Matrix& factor, Mode mode,
                     Contract contract = Contract::kCols);

/// Latent-to-observed expansion core x_key W_key x_loc W_loc with row
/// contraction on both modes (W_key is d_k x k, W_loc is d_l x l).
Tensor3 expand(const Tensor3& core, const Matrix& w_key, const Matrix& w_loc);

/// Adjoint of expand: projects an observed tensor into latent space,
/// result(t, i, j) = sum_{u,v} W_key(i, u) W_loc(j, v) x(t, u, v).
Tensor3 project(const Tensor3& observed, const Matrix& w_key, const Matrix& w_loc);

}  // namespace rdstream
