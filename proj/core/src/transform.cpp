#include "olinear/transform.hpp"

#include <cmath>
#include <numbers>

#include "olinear/error.hpp"

namespace olinear {

namespace {

constexpr double kEigenFloor = -1e-9;

// out fiber = x fiber * m, for every fiber along the last axis.
Tensor3 multiply_last_axis(const Tensor3& x, const Matrix& m, const char* what) {
  if (x.d2() != m.rows()) {
    throw ShapeError(std::string(what) + ": last axis has length " + std::to_string(x.d2()) +
                     " but the basis is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  Tensor3 out(x.d0(), x.d1(), m.cols());
  matmul_into(x.values(), m.values(), out.values(), x.d0() * x.d1(), m.rows(), m.cols());
  return out;
}

}  // namespace

const char* to_string(BasisMethod m) noexcept {
  switch (m) {
    case BasisMethod::eigen: return "eigen";
    case BasisMethod::fourier: return "fourier";
    case BasisMethod::identity: return "identity";
  }
  return "?";
}

BasisMethod parse_basis_method(const std::string& s) {
  if (s == "eigen") return BasisMethod::eigen;
  if (s == "fourier") return BasisMethod::fourier;
  if (s == "identity") return BasisMethod::identity;
  throw ConfigError("unknown basis method '" + s + "' (expected eigen, fourier or identity)");
}

Matrix fourier_basis(std::size_t n) {
  Matrix q(n, n);
  const double nd = static_cast<double>(n);
  const double c0 = 1.0 / std::sqrt(nd);
  const double ck = std::sqrt(2.0 / nd);
  for (std::size_t t = 0; t < n; ++t) q(t, 0) = c0;
  std::size_t col = 1;
  for (std::size_t k = 1; 2 * k < n; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * t % n) / nd;
      q(t, col) = ck * std::cos(angle);
      q(t, col + 1) = ck * std::sin(angle);
    }
    col += 2;
  }
  if (n % 2 == 0 && n > 0) {
    for (std::size_t t = 0; t < n; ++t) q(t, col) = (t % 2 == 0 ? c0 : -c0);
  }
  return q;
}

OrthoBasis build_basis(const CorrEstimate* corr, BasisMethod method, std::size_t n) {
  if (n == 0) throw InputError("basis size must be positive");
  OrthoBasis b;
  b.method = method;
  b.n = n;
  switch (method) {
    case BasisMethod::identity:
      b.q = Matrix::identity(n);
      break;
    case BasisMethod::fourier:
      b.q = fourier_basis(n);
      break;
    case BasisMethod::eigen: {
      if (corr == nullptr) throw ConfigError("eigen basis requires a correlation estimate");
      if (corr->window != n || corr->matrix.rows() != n) {
        throw ConfigError("eigen basis of size " + std::to_string(n) +
                          " needs a correlation estimate of window " + std::to_string(n) +
                          ", got " + std::to_string(corr->window));
      }
      auto eig = symmetric_eigendecomp(corr->matrix);
      if (eig.lambda.back() < kEigenFloor) {
        throw NumericalError("correlation matrix has a negative eigenvalue " +
                             std::to_string(eig.lambda.back()));
      }
      b.q = std::move(eig.q);
      b.eigenvalues = std::move(eig.lambda);
      break;
    }
  }
  return b;
}

Tensor3 apply_temporal(const Tensor3& x, const OrthoBasis& basis) {
  if (x.d2() != basis.n) {
    throw ShapeError("apply_temporal: last axis has length " + std::to_string(x.d2()) +
                     ", basis size is " + std::to_string(basis.n));
  }
  if (basis.method == BasisMethod::identity) return x;
  return multiply_last_axis(x, basis.q, "apply_temporal");
}

Tensor3 invert_temporal(const Tensor3& x, const OrthoBasis& basis) {
  if (x.d2() != basis.n) {
    throw ShapeError("invert_temporal: last axis has length " + std::to_string(x.d2()) +
                     ", basis size is " + std::to_string(basis.n));
  }
  if (basis.method == BasisMethod::identity) return x;
  return multiply_last_axis(x, basis.q.transposed(), "invert_temporal");
}

double decorrelation_score(const WindowBatch& windows, const OrthoBasis& basis) {
  const Tensor3 z = apply_temporal(windows.inputs, basis);
  const std::size_t samples = z.d0() * z.d1();
  if (samples < 2) throw DataError("decorrelation_score needs at least 2 windows");
  const std::size_t n = z.d2();
  const auto vals = z.values();

  std::vector<double> mean(n, 0.0);
  for (std::size_t s = 0; s < samples; ++s)
    for (std::size_t k = 0; k < n; ++k) mean[k] += vals[s * n + k];
  for (double& m : mean) m /= static_cast<double>(samples);

  Matrix cov(n, n);
  for (std::size_t s = 0; s < samples; ++s) {
    const double* row = vals.data() + s * n;
    for (std::size_t p = 0; p < n; ++p) {
      const double dp = row[p] - mean[p];
      for (std::size_t q = p; q < n; ++q) cov(p, q) += dp * (row[q] - mean[q]);
    }
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      const double denom = std::sqrt(cov(p, p) * cov(q, q));
      total += denom > 0.0 ? std::abs(cov(p, q) / denom) : 0.0;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

PreparedBases prepare_bases(const TimeSeriesDataset& ds, BasisMethod method, std::size_t lookback,
                            std::size_t horizon, double source_fraction) {
  PreparedBases pb;
  pb.corr_v = variate_corr(ds, source_fraction);
  if (method == BasisMethod::eigen) {
    pb.corr_in = lagged_temporal_corr(ds, lookback, source_fraction);
    pb.corr_out = lagged_temporal_corr(ds, horizon, source_fraction);
  }
  pb.q_in = build_basis(pb.corr_in ? &*pb.corr_in : nullptr, method, lookback);
  pb.q_out = build_basis(pb.corr_out ? &*pb.corr_out : nullptr, method, horizon);
  return pb;
}

}  // namespace olinear
