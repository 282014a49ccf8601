#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace olinear {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  [[nodiscard]] std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

  [[nodiscard]] Matrix transposed() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense row-major 3-D array of doubles, indexed (i, j, k) over (d0, d1, d2).
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0);
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<double> data);

  [[nodiscard]] std::size_t d0() const noexcept { return d0_; }
  [[nodiscard]] std::size_t d1() const noexcept { return d1_; }
  [[nodiscard]] std::size_t d2() const noexcept { return d2_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * d1_ + j) * d2_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * d1_ + j) * d2_ + k];
  }

  /// The contiguous last-axis fiber at (i, j).
  [[nodiscard]] std::span<double> fiber(std::size_t i, std::size_t j) {
    return {data_.data() + (i * d1_ + j) * d2_, d2_};
  }
  [[nodiscard]] std::span<const double> fiber(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * d1_ + j) * d2_, d2_};
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

  [[nodiscard]] bool same_shape(const Tensor3& o) const noexcept {
    return d0_ == o.d0_ && d1_ == o.d1_ && d2_ == o.d2_;
  }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t d0_ = 0;
  std::size_t d1_ = 0;
  std::size_t d2_ = 0;
  std::vector<double> data_;
};

struct EigenDecomposition {
  Matrix q;                   // eigenvectors as columns
  std::vector<double> lambda; // descending
};

struct RankReport {
  std::size_t numerical_rank = 0;
  double effective_rank = 0.0;
  std::vector<double> singular_values;  // descending
};

/// Throws ShapeError when a.cols != b.rows, NumericalError on non-finite output.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Row-major product of raw buffers: out(m x n) = a(m x k) * b(k x n).
/// `out` is overwritten. No shape checks beyond span sizes.
void matmul_into(std::span<const double> a, std::span<const double> b,
                 std::span<double> out, std::size_t m, std::size_t k, std::size_t n);

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Eigenvalues are sorted descending with ties broken by original diagonal
/// position; each eigenvector is signed so that its first entry with
/// magnitude above 1e-12 is positive. Identical input bytes produce identical
/// output bytes.
///
/// Throws ShapeError for non-square input, InputError when the asymmetry
/// max|s - s^T| exceeds 1e-9, ConvergenceError after 100 sweeps.
EigenDecomposition symmetric_eigendecomp(const Matrix& s);

/// Singular-value rank summary via the eigenvalues of m^T m.
/// numerical_rank counts sigma_i > tol * sigma_max; effective_rank is the
/// exponential of the Shannon entropy of sigma / sum(sigma). Zero matrix
/// reports (0, 0).
RankReport rank_report(const Matrix& m, double tol);

[[nodiscard]] double max_abs_diff(const Matrix& a, const Matrix& b);
[[nodiscard]] double max_abs_diff(const Tensor3& a, const Tensor3& b);
[[nodiscard]] bool all_finite(std::span<const double> v) noexcept;

/// max |q^T q - I| over all entries.
[[nodiscard]] double orthogonality_error(const Matrix& q);

}  // namespace olinear
