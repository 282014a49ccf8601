#include "nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "olinear/error.hpp"

namespace olinear {

namespace {

constexpr double kZeroNorm = 1e-300;

double softplus(double a) noexcept { return a > 30.0 ? a : std::log1p(std::exp(a)); }

double sigmoid(double a) noexcept {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

void softmax_into(std::span<const double> a, std::span<double> out) {
  const double m = *std::max_element(a.begin(), a.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::exp(a[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

void transform_row(std::span<const double> a, NormLinTransform t, std::span<double> b) {
  switch (t) {
    case NormLinTransform::softplus:
      for (std::size_t i = 0; i < a.size(); ++i) b[i] = softplus(a[i]);
      break;
    case NormLinTransform::sigmoid:
      for (std::size_t i = 0; i < a.size(); ++i) b[i] = sigmoid(a[i]);
      break;
    case NormLinTransform::relu:
      for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    case NormLinTransform::identity:
      std::copy(a.begin(), a.end(), b.begin());
      break;
    case NormLinTransform::softmax:
      softmax_into(a, b);
      break;
  }
}

double row_norm(std::span<const double> b, NormLinNorm norm) {
  double s = 0.0;
  if (norm == NormLinNorm::l1) {
    for (double v : b) s += std::abs(v);
    return s;
  }
  for (double v : b) s += v * v;
  return std::sqrt(s);
}

// d_b from d_c for c = b / ||b||.
void norm_backward(std::span<const double> b, double s, NormLinNorm norm,
                   std::span<const double> dc, std::span<double> db) {
  double dot = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) dot += dc[i] * b[i];
  if (norm == NormLinNorm::l1) {
    const double s2 = s * s;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double sign = b[j] > 0.0 ? 1.0 : (b[j] < 0.0 ? -1.0 : 0.0);
      db[j] = dc[j] / s - sign * dot / s2;
    }
  } else {
    const double s3 = s * s * s;
    for (std::size_t j = 0; j < b.size(); ++j) db[j] = dc[j] / s - b[j] * dot / s3;
  }
}

// d_a from d_b through the entrywise (or softmax) transform.
void transform_backward(std::span<const double> a, std::span<const double> b, NormLinTransform t,
                        std::span<const double> db, std::span<double> da) {
  switch (t) {
    case NormLinTransform::softplus:
      for (std::size_t i = 0; i < a.size(); ++i) da[i] = db[i] * sigmoid(a[i]);
      break;
    case NormLinTransform::sigmoid:
      for (std::size_t i = 0; i < a.size(); ++i) da[i] = db[i] * b[i] * (1.0 - b[i]);
      break;
    case NormLinTransform::relu:
      for (std::size_t i = 0; i < a.size(); ++i) da[i] = a[i] > 0.0 ? db[i] : 0.0;
      break;
    case NormLinTransform::identity:
      std::copy(db.begin(), db.end(), da.begin());
      break;
    case NormLinTransform::softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dot += b[i] * db[i];
      for (std::size_t i = 0; i < a.size(); ++i) da[i] = b[i] * (db[i] - dot);
      break;
    }
  }
}

}  // namespace

const char* to_string(NormLinTransform t) noexcept {
  switch (t) {
    case NormLinTransform::softplus: return "softplus";
    case NormLinTransform::softmax: return "softmax";
    case NormLinTransform::sigmoid: return "sigmoid";
    case NormLinTransform::relu: return "relu";
    case NormLinTransform::identity: return "identity";
  }
  return "?";
}

const char* to_string(NormLinNorm n) noexcept { return n == NormLinNorm::l1 ? "l1" : "l2"; }

const char* to_string(Variant v) noexcept {
  return v == Variant::olinear ? "olinear" : "olinear_c";
}

NormLinTransform parse_normlin_transform(const std::string& s) {
  for (auto t : {NormLinTransform::softplus, NormLinTransform::softmax, NormLinTransform::sigmoid,
                 NormLinTransform::relu, NormLinTransform::identity}) {
    if (s == to_string(t)) return t;
  }
  throw ConfigError("unknown NormLin transform '" + s +
                    "' (expected softplus, softmax, sigmoid, relu or identity)");
}

NormLinNorm parse_normlin_norm(const std::string& s) {
  if (s == "l1") return NormLinNorm::l1;
  if (s == "l2") return NormLinNorm::l2;
  throw ConfigError("unknown NormLin norm '" + s + "' (expected l1 or l2)");
}

Variant parse_variant(const std::string& s) {
  if (s == "olinear") return Variant::olinear;
  if (s == "olinear_c") return Variant::olinear_c;
  throw ConfigError("unknown variant '" + s + "' (expected olinear or olinear_c)");
}

NormLinWeight normlin_weight(const Matrix& w, NormLinTransform transform, NormLinNorm norm) {
  if (w.rows() != w.cols()) throw ShapeError("NormLin weight must be square");
  const std::size_t n = w.rows();
  NormLinWeight out{Matrix(n, n), 0};
  std::vector<double> b(n);
  for (std::size_t r = 0; r < n; ++r) {
    transform_row(w.row(r), transform, b);
    const double s = row_norm(b, norm);
    auto dst = out.weight.row(r);
    if (s <= kZeroNorm) {
      std::fill(dst.begin(), dst.end(), 1.0 / static_cast<double>(n));
      ++out.fallback_rows;
      continue;
    }
    for (std::size_t c = 0; c < n; ++c) dst[c] = b[c] / s;
  }
  return out;
}

Matrix normlin_weight_backward(const Matrix& w, NormLinTransform transform, NormLinNorm norm,
                               const Matrix& d_weight) {
  const std::size_t n = w.rows();
  if (d_weight.rows() != n || d_weight.cols() != n) throw ShapeError("NormLin gradient shape mismatch");
  Matrix dw(n, n);
  std::vector<double> b(n), db(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto a = w.row(r);
    transform_row(a, transform, b);
    const double s = row_norm(b, norm);
    if (s <= kZeroNorm) continue;  // uniform fallback row is constant
    const auto dc = d_weight.row(r);
    auto da = dw.row(r);
    if (transform == NormLinTransform::softplus && norm == NormLinNorm::l1) {
      // J^T dc with J = (1/s)(Diag(bt) - bbar bt^T), bt = sigmoid(a), bbar = b/s.
      double bbar_dc = 0.0;
      for (std::size_t i = 0; i < n; ++i) bbar_dc += b[i] / s * dc[i];
      for (std::size_t j = 0; j < n; ++j) da[j] = sigmoid(a[j]) * (dc[j] - bbar_dc) / s;
      continue;
    }
    norm_backward(b, s, norm, dc, db);
    transform_backward(a, b, transform, db, da);
  }
  return dw;
}

Matrix softmax_jacobian(std::span<const double> a) {
  const std::size_t n = a.size();
  std::vector<double> c(n);
  softmax_into(a, c);
  Matrix j(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < n; ++k) j(r, k) = (r == k ? c[r] : 0.0) - c[r] * c[k];
  return j;
}

Matrix normlin_jacobian(std::span<const double> a) {
  const std::size_t n = a.size();
  std::vector<double> b(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    b[i] = softplus(a[i]);
    s += b[i];
  }
  Matrix j(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const double bt = sigmoid(a[k]);
      j(r, k) = ((r == k ? bt : 0.0) - (b[r] / s) * bt) / s;
    }
  }
  return j;
}

Matrix normlin_row_jacobian(std::span<const double> a, NormLinTransform transform, NormLinNorm norm) {
  const std::size_t n = a.size();
  if (transform == NormLinTransform::softplus && norm == NormLinNorm::l1) return normlin_jacobian(a);
  Matrix j(n, n);
  std::vector<double> b(n), dc(n), db(n), da(n);
  transform_row(a, transform, b);
  const double s = row_norm(b, norm);
  if (s <= kZeroNorm) return j;
  // Column k of J^T (i.e. row k of J) from a unit upstream gradient on c_k.
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(dc.begin(), dc.end(), 0.0);
    dc[k] = 1.0;
    norm_backward(b, s, norm, dc, db);
    transform_backward(a, b, transform, db, da);
    for (std::size_t c = 0; c < n; ++c) j(k, c) = da[c];
  }
  return j;
}

Matrix build_olinear_c_weight(const CorrEstimate& corr_v, NormLinTransform transform) {
  return normlin_weight(corr_v.matrix, transform, NormLinNorm::l1).weight;
}

double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

namespace detail {

void linear_rows(std::span<const double> in, std::size_t rows, const Linear& lin,
                 std::span<double> out) {
  const std::size_t out_dim = lin.w.rows();
  const std::size_t in_dim = lin.w.cols();
  // Row times W^T as a sequence of axpys, which vectorizes where a per-output
  // dot product would be bound by its accumulator chain.
  const Matrix wt = lin.w.transposed();
  const double* w = wt.values().data();
  const double* b = lin.b.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * in_dim;
    double* y = out.data() + r * out_dim;
    std::copy(b, b + out_dim, y);
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double xi = x[i];
      const double* wr = w + i * out_dim;
      for (std::size_t o = 0; o < out_dim; ++o) y[o] += xi * wr[o];
    }
  }
}

void linear_rows_backward(std::span<const double> in, std::span<const double> d_out,
                          std::size_t rows, const Linear& lin, Linear& g, std::span<double> d_in) {
  const std::size_t out_dim = lin.w.rows();
  const std::size_t in_dim = lin.w.cols();
  const double* w = lin.w.values().data();
  double* gw = g.w.values().data();
  double* gb = g.b.values().data();
  if (!d_in.empty()) std::fill(d_in.begin(), d_in.begin() + static_cast<std::ptrdiff_t>(rows * in_dim), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * in_dim;
    const double* dy = d_out.data() + r * out_dim;
    double* dx = d_in.empty() ? nullptr : d_in.data() + r * in_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double d = dy[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* gwr = gw + o * in_dim;
      const double* wr = w + o * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) gwr[i] += d * x[i];
      if (dx != nullptr)
        for (std::size_t i = 0; i < in_dim; ++i) dx[i] += d * wr[i];
    }
  }
}

void layer_norm_rows(std::span<const double> x, std::size_t rows, const LayerNormParams& p,
                     std::span<double> out, LayerNormCache& cache) {
  const std::size_t width = p.gamma.cols();
  cache.xhat.assign(rows * width, 0.0);
  cache.inv_std.assign(rows, 0.0);
  const double* gamma = p.gamma.values().data();
  const double* beta = p.beta.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * width;
    double mean = 0.0;
    for (std::size_t i = 0; i < width; ++i) mean += xr[i];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(width);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv;
    double* xh = cache.xhat.data() + r * width;
    double* yr = out.data() + r * width;
    for (std::size_t i = 0; i < width; ++i) {
      xh[i] = (xr[i] - mean) * inv;
      yr[i] = gamma[i] * xh[i] + beta[i];
    }
  }
}

void layer_norm_rows_backward(const LayerNormCache& cache, std::span<const double> d_out,
                              std::size_t rows, const LayerNormParams& p, LayerNormParams& g,
                              std::span<double> d_x) {
  const std::size_t width = p.gamma.cols();
  const double* gamma = p.gamma.values().data();
  double* gg = g.gamma.values().data();
  double* gb = g.beta.values().data();
  const double inv_w = 1.0 / static_cast<double>(width);
  std::vector<double> dxhat(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xh = cache.xhat.data() + r * width;
    const double* dy = d_out.data() + r * width;
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      gg[i] += dy[i] * xh[i];
      gb[i] += dy[i];
      dxhat[i] = dy[i] * gamma[i];
      mean_d += dxhat[i];
      mean_dx += dxhat[i] * xh[i];
    }
    mean_d *= inv_w;
    mean_dx *= inv_w;
    double* dx = d_x.data() + r * width;
    for (std::size_t i = 0; i < width; ++i)
      dx[i] = cache.inv_std[r] * (dxhat[i] - mean_d - xh[i] * mean_dx);
  }
}

}  // namespace detail

}  // namespace olinear
