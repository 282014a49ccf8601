#include "olinear/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "olinear/error.hpp"

namespace olinear {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr int kMaxSweeps = 100;
constexpr double kSignThreshold = 1e-12;

std::string dims(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + dims(rows_, cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Tensor3::Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill)
    : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

Tensor3::Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, std::vector<double> data)
    : d0_(d0), d1_(d1), d2_(d2), data_(std::move(data)) {
  if (data_.size() != d0_ * d1_ * d2_) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(d0_) + "x" + std::to_string(d1_) +
                     "x" + std::to_string(d2_));
  }
}

void matmul_into(std::span<const double> a, std::span<const double> b, std::span<double> out,
                 std::size_t m, std::size_t k, std::size_t n) {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m * n), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    const double* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + dims(a.rows(), a.cols()) + " times " +
                     dims(b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  matmul_into(a.values(), b.values(), out.values(), a.rows(), a.cols(), b.cols());
  if (!all_finite(out.values())) throw NumericalError("matmul: non-finite result");
  return out;
}

EigenDecomposition symmetric_eigendecomp(const Matrix& s) {
  const std::size_t n = s.rows();
  if (n != s.cols()) throw ShapeError("eigendecomposition needs a square matrix, got " +
                                      dims(s.rows(), s.cols()));
  if (!all_finite(s.values())) throw InputError("eigendecomposition: non-finite input");
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) asym = std::max(asym, std::abs(s(i, j) - s(j, i)));
  if (asym > kSymmetryTol) {
    throw InputError("eigendecomposition: matrix not symmetric (max deviation " +
                     std::to_string(asym) + ")");
  }

  // Work on the symmetrized upper triangle.
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(n);
  std::vector<double> d(n), b(n), z(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = b[i] = a(i, i);

  bool converged = n <= 1;
  for (int sweep = 1; sweep <= kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off == 0.0) {
      converged = true;
      break;
    }
    const double nn = static_cast<double>(n * n);
    const double threshold = sweep < 4 ? 0.2 * off / nn : 0.0;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double g = 100.0 * std::abs(a(p, q));
        if (sweep > 4 && std::abs(d[p]) + g == std::abs(d[p]) &&
            std::abs(d[q]) + g == std::abs(d[q])) {
          a(p, q) = 0.0;
          continue;
        }
        if (std::abs(a(p, q)) <= threshold) continue;

        double h = d[q] - d[p];
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = a(p, q) / h;
        } else {
          const double theta = 0.5 * h / a(p, q);
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        const double tau = sn / (1.0 + c);
        h = t * a(p, q);
        z[p] -= h;
        z[q] += h;
        d[p] -= h;
        d[q] += h;
        a(p, q) = 0.0;

        auto rotate = [&](Matrix& m, std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
          const double gg = m(i, j);
          const double hh = m(k, l);
          m(i, j) = gg - sn * (hh + gg * tau);
          m(k, l) = hh + sn * (gg - hh * tau);
        };
        for (std::size_t j = 0; j < p; ++j) rotate(a, j, p, j, q);
        for (std::size_t j = p + 1; j < q; ++j) rotate(a, p, j, j, q);
        for (std::size_t j = q + 1; j < n; ++j) rotate(a, p, j, q, j);
        for (std::size_t j = 0; j < n; ++j) rotate(v, j, p, j, q);
      }
    }
    for (std::size_t p = 0; p < n; ++p) {
      b[p] += z[p];
      d[p] = b[p];
      z[p] = 0.0;
    }
  }
  if (!converged) {
    throw ConvergenceError("eigendecomposition did not converge within " +
                           std::to_string(kMaxSweeps) + " sweeps");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return d[x] > d[y]; });

  EigenDecomposition out{Matrix(n, n), std::vector<double>(n)};
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    out.lambda[c] = d[src];
    double sign = 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (std::abs(v(r, src)) > kSignThreshold) {
        sign = v(r, src) < 0.0 ? -1.0 : 1.0;
        break;
      }
    }
    for (std::size_t r = 0; r < n; ++r) out.q(r, c) = sign * v(r, src);
  }
  return out;
}

RankReport rank_report(const Matrix& m, double tol) {
  if (!(tol > 0.0)) throw InputError("rank_report: tol must be positive");
  RankReport rep;
  if (m.empty()) return rep;
  const Matrix gram = matmul(m.transposed(), m);
  const auto eig = symmetric_eigendecomp(gram);
  rep.singular_values.reserve(eig.lambda.size());
  // Eigenvalues of the Gram matrix inside its roundoff band are exact zeros;
  // their square roots would otherwise sit near sqrt(eps) * sigma_max.
  const double noise = 16.0 * static_cast<double>(gram.rows()) * std::numeric_limits<double>::epsilon() *
                       std::max(eig.lambda.front(), 0.0);
  for (double l : eig.lambda) rep.singular_values.push_back(l > noise ? std::sqrt(l) : 0.0);

  const double smax = rep.singular_values.front();
  if (smax == 0.0) return rep;

  double total = 0.0;
  for (double sv : rep.singular_values) {
    if (sv > tol * smax) ++rep.numerical_rank;
    total += sv;
  }
  double entropy = 0.0;
  for (double sv : rep.singular_values) {
    const double p = sv / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  rep.effective_rank = std::exp(entropy);
  return rep;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double orthogonality_error(const Matrix& q) {
  const Matrix g = matmul(q.transposed(), q);
  return max_abs_diff(g, Matrix::identity(q.cols()));
}

}  // namespace olinear
