#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace olinear::testing {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

std::size_t gauss_rank(Matrix a, double tol) {
  double scale = 0.0;
  for (double v : a.values()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0;
  std::size_t rank = 0;
  std::vector<bool> used(a.rows(), false);
  for (std::size_t c = 0; c < a.cols(); ++c) {
    std::size_t best = a.rows();
    double best_abs = tol * scale;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (!used[r] && std::abs(a(r, c)) > best_abs) {
        best = r;
        best_abs = std::abs(a(r, c));
      }
    }
    if (best == a.rows()) continue;
    used[best] = true;
    ++rank;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      if (used[r]) continue;
      const double f = a(r, c) / a(best, c);
      for (std::size_t k = c; k < a.cols(); ++k) a(r, k) -= f * a(best, k);
    }
  }
  return rank;
}

double textbook_pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

ReferenceMetrics reference_metrics(const Tensor3& p, const Tensor3& y) {
  const std::size_t B = p.d0(), N = p.d1(), H = p.d2();
  ReferenceMetrics m;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < H; ++t) {
        const double e = p(b, n, t) - y(b, n, t);
        m.mse += e * e;
        m.mae += std::abs(e);
      }
  m.mse /= static_cast<double>(B * N * H);
  m.mae /= static_cast<double>(B * N * H);

  for (std::size_t n = 0; n < N; ++n) {
    std::vector<double> all_y, all_p;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < H; ++t) {
        all_y.push_back(y(b, n, t));
        all_p.push_back(p(b, n, t));
      }
    double mean = 0.0;
    for (double v : all_y) mean += v;
    mean /= static_cast<double>(all_y.size());
    double res = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < all_y.size(); ++i) {
      res += (all_y[i] - all_p[i]) * (all_y[i] - all_p[i]);
      tot += (all_y[i] - mean) * (all_y[i] - mean);
    }
    m.r2 += (1.0 - res / tot) / static_cast<double>(N);

    double r_sum = 0.0, mase_sum = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<double> yp(H), yy(H);
      for (std::size_t t = 0; t < H; ++t) {
        yp[t] = p(b, n, t);
        yy[t] = y(b, n, t);
      }
      r_sum += textbook_pearson(yp, yy);
      double err = 0.0, naive = 0.0;
      for (std::size_t t = 0; t < H; ++t) err += std::abs(yp[t] - yy[t]);
      for (std::size_t t = 1; t < H; ++t) naive += std::abs(yy[t] - yy[t - 1]);
      mase_sum += (err / static_cast<double>(H)) / (naive / static_cast<double>(H - 1));
    }
    m.r += r_sum / static_cast<double>(B) / static_cast<double>(N);
    m.mase += mase_sum / static_cast<double>(B) / static_cast<double>(N);
  }
  return m;
}

Matrix reference_normlin(const Matrix& w, NormLinTransform t, NormLinNorm norm) {
  const std::size_t n = w.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> b(n);
    double row_max = w(i, 0);
    for (std::size_t j = 0; j < n; ++j) row_max = std::max(row_max, w(i, j));
    double sum_exp = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum_exp += std::exp(w(i, j) - row_max);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = w(i, j);
      switch (t) {
        case NormLinTransform::softplus: b[j] = std::log(1.0 + std::exp(a)); break;
        case NormLinTransform::softmax: b[j] = std::exp(a - row_max) / sum_exp; break;
        case NormLinTransform::sigmoid: b[j] = 1.0 / (1.0 + std::exp(-a)); break;
        case NormLinTransform::relu: b[j] = a > 0 ? a : 0.0; break;
        case NormLinTransform::identity: b[j] = a; break;
      }
    }
    double s = 0.0;
    for (double v : b) s += norm == NormLinNorm::l1 ? std::abs(v) : v * v;
    if (norm == NormLinNorm::l2) s = std::sqrt(s);
    for (std::size_t j = 0; j < n; ++j) out(i, j) = s > 0.0 ? b[j] / s : 1.0 / static_cast<double>(n);
  }
  return out;
}

namespace {

// x[..., in] -> x[..., out] for a vector of rows.
std::vector<double> apply_linear(const std::vector<double>& x, const Linear& lin) {
  std::vector<double> y(lin.w.rows());
  for (std::size_t o = 0; o < lin.w.rows(); ++o) {
    double s = lin.b(0, o);
    for (std::size_t i = 0; i < lin.w.cols(); ++i) s += lin.w(o, i) * x[i];
    y[o] = s;
  }
  return y;
}

std::vector<double> layer_norm(const std::vector<double>& x, const LayerNormParams& p) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = p.gamma(0, i) * (x[i] - mean) / std::sqrt(var + 1e-5) + p.beta(0, i);
  }
  return y;
}

}  // namespace

Tensor3 reference_forward(const Tensor3& inputs, const OLinearParams& params, const OLinearConfig& cfg) {
  const auto& W = params.weights;
  const std::size_t B = inputs.d0(), N = cfg.n_variates, T = cfg.lookback, H = cfg.horizon;
  const std::size_t d = cfg.embed_size, D = cfg.model_dim;
  // hidden[b][n][k] is a length-D vector
  std::vector<std::vector<std::vector<std::vector<double>>>> h(
      B, std::vector<std::vector<std::vector<double>>>(N, std::vector<std::vector<double>>(d)));
  Matrix mean(B, N), sd(B, N);

  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n) {
      double mu = 0.0;
      for (std::size_t t = 0; t < T; ++t) mu += inputs(b, n, t);
      mu /= static_cast<double>(T);
      double var = 0.0;
      for (std::size_t t = 0; t < T; ++t) var += (inputs(b, n, t) - mu) * (inputs(b, n, t) - mu);
      var /= static_cast<double>(T);
      mean(b, n) = mu;
      sd(b, n) = std::sqrt(var + 1e-5);
      for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> z(T, 0.0);
        for (std::size_t j = 0; j < T; ++j)
          for (std::size_t t = 0; t < T; ++t)
            z[j] += params.q_in.q(t, j) * (inputs(b, n, t) - mu) / sd(b, n) * W.phi_d(0, k);
        h[b][n][k] = apply_linear(z, W.enc);
      }
    }

  for (const auto& blk : W.blocks) {
    const Matrix mix = cfg.variant == Variant::olinear_c
                           ? blk.normlin_w
                           : reference_normlin(blk.normlin_w, cfg.normlin_transform, cfg.normlin_norm);
    for (std::size_t b = 0; b < B; ++b) {
      std::vector<std::vector<std::vector<double>>> u(N, std::vector<std::vector<double>>(d));
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < d; ++k)
          u[n][k] = blk.csl_pre.present() ? apply_linear(h[b][n][k], blk.csl_pre) : h[b][n][k];
      auto next = h[b];
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t k = 0; k < d; ++k) {
          std::vector<double> v(D, 0.0);
          for (std::size_t m = 0; m < N; ++m)
            for (std::size_t j = 0; j < D; ++j) v[j] += mix(n, m) * u[m][k][j];
          if (blk.csl_post.present()) v = apply_linear(v, blk.csl_post);
          for (std::size_t j = 0; j < D; ++j) v[j] += h[b][n][k][j];
          std::vector<double> c = layer_norm(v, blk.csl_norm);

          std::vector<double> a = apply_linear(c, blk.isl_lin1);
          for (double& x : a) x = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
          std::vector<double> s = apply_linear(a, blk.isl_lin2);
          for (std::size_t j = 0; j < D; ++j) s[j] += c[j];
          next[n][k] = layer_norm(s, blk.isl_norm);
        }
      h[b] = std::move(next);
    }
  }

  Tensor3 out(B, N, H);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n) {
      std::vector<double> flat(d * H);
      for (std::size_t k = 0; k < d; ++k) {
        const std::vector<double> y = apply_linear(h[b][n][k], W.dec);
        for (std::size_t t = 0; t < H; ++t) {
          double s = 0.0;
          for (std::size_t j = 0; j < H; ++j) s += params.q_out.q(t, j) * y[j];
          flat[k * H + t] = s;
        }
      }
      const std::vector<double> o = apply_linear(flat, W.flat);
      for (std::size_t t = 0; t < H; ++t) out(b, n, t) = o[t] * sd(b, n) + mean(b, n);
    }
  return out;
}

Tensor3 persistence_forecast(const WindowBatch& w) {
  Tensor3 out(w.targets.d0(), w.targets.d1(), w.targets.d2());
  for (std::size_t b = 0; b < out.d0(); ++b)
    for (std::size_t n = 0; n < out.d1(); ++n)
      for (std::size_t t = 0; t < out.d2(); ++t) out(b, n, t) = w.inputs(b, n, w.inputs.d2() - 1);
  return out;
}

Tensor3 mean_forecast(const WindowBatch& w) {
  Tensor3 out(w.targets.d0(), w.targets.d1(), w.targets.d2());
  for (std::size_t b = 0; b < out.d0(); ++b)
    for (std::size_t n = 0; n < out.d1(); ++n) {
      double mu = 0.0;
      for (std::size_t t = 0; t < w.inputs.d2(); ++t) mu += w.inputs(b, n, t);
      mu /= static_cast<double>(w.inputs.d2());
      for (std::size_t t = 0; t < out.d2(); ++t) out(b, n, t) = mu;
    }
  return out;
}

double mse(const Tensor3& a, const Tensor3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return s / static_cast<double>(a.size());
}

Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky: matrix is not positive definite");
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

}  // namespace olinear::testing
