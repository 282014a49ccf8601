#include "olinear/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "olinear/error.hpp"

namespace olinear {

namespace {

constexpr double kMinEigen = 1e-12;

struct RunningMean {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  [[nodiscard]] double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
};

}  // namespace

MetricsReport metrics(const Tensor3& preds, const Tensor3& targets) {
  if (!preds.same_shape(targets)) throw ShapeError("metrics: prediction and target shapes differ");
  const std::size_t b = preds.d0(), n = preds.d1(), tau = preds.d2();
  if (b == 0 || n == 0 || tau == 0) throw ShapeError("metrics: empty tensors");
  if (tau < 2) throw InputError("metrics: MASE needs a horizon of at least 2");

  MetricsReport rep;
  rep.n_windows = b;
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds.values()[i] - targets.values()[i];
    se += e * e;
    ae += std::abs(e);
  }
  const auto count = static_cast<double>(preds.size());
  rep.mse = se / count;
  rep.mae = ae / count;

  RunningMean r2_all, r_all, mase_all;
  for (std::size_t v = 0; v < n; ++v) {
    // R^2 over every (window, step) of this variate.
    double mean_y = 0.0;
    for (std::size_t w = 0; w < b; ++w)
      for (double y : targets.fiber(w, v)) mean_y += y;
    mean_y /= static_cast<double>(b * tau);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t w = 0; w < b; ++w) {
      const auto p = preds.fiber(w, v);
      const auto y = targets.fiber(w, v);
      for (std::size_t t = 0; t < tau; ++t) {
        ss_res += (p[t] - y[t]) * (p[t] - y[t]);
        ss_tot += (y[t] - mean_y) * (y[t] - mean_y);
      }
    }
    if (ss_tot > 0.0) r2_all.add(1.0 - ss_res / ss_tot);
    else ++rep.r2_excluded_variates;

    RunningMean r_var, mase_var;
    for (std::size_t w = 0; w < b; ++w) {
      const auto p = preds.fiber(w, v);
      const auto y = targets.fiber(w, v);
      double mp = 0.0, my = 0.0;
      for (std::size_t t = 0; t < tau; ++t) {
        mp += p[t];
        my += y[t];
      }
      mp /= static_cast<double>(tau);
      my /= static_cast<double>(tau);
      double spy = 0.0, spp = 0.0, syy = 0.0, abs_err = 0.0;
      for (std::size_t t = 0; t < tau; ++t) {
        spy += (p[t] - mp) * (y[t] - my);
        spp += (p[t] - mp) * (p[t] - mp);
        syy += (y[t] - my) * (y[t] - my);
        abs_err += std::abs(p[t] - y[t]);
      }
      if (spp > 0.0 && syy > 0.0) r_var.add(std::clamp(spy / std::sqrt(spp * syy), -1.0, 1.0));
      else ++rep.r_excluded_pairs;

      double naive = 0.0;
      for (std::size_t t = 1; t < tau; ++t) naive += std::abs(y[t] - y[t - 1]);
      naive /= static_cast<double>(tau - 1);
      if (naive > 0.0) mase_var.add((abs_err / static_cast<double>(tau)) / naive);
      else ++rep.mase_excluded_pairs;
    }
    if (r_var.count > 0) r_all.add(r_var.mean());
    if (mase_var.count > 0) mase_all.add(mase_var.mean());
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.r2 = r2_all.count > 0 ? r2_all.mean() : nan;
  rep.pearson_r = r_all.count > 0 ? r_all.mean() : nan;
  rep.mase = mase_all.count > 0 ? mase_all.mean() : nan;
  return rep;
}

double conditional_gaussian_mean(std::span<const double> mu_x, double mu_y, const Matrix& sigma_x,
                                 std::span<const double> sigma_xy, std::span<const double> x) {
  const std::size_t n = mu_x.size();
  if (sigma_x.rows() != n || sigma_x.cols() != n || sigma_xy.size() != n || x.size() != n) {
    throw ShapeError("conditional_gaussian_mean: inconsistent dimensions");
  }
  const auto eig = symmetric_eigendecomp(sigma_x);
  if (n > 0 && !(eig.lambda.back() > kMinEigen)) {
    throw InputError("conditional_gaussian_mean: covariance is not positive definite (min eigenvalue " +
                     std::to_string(eig.lambda.back()) + ")");
  }
  // sigma_xy^T Q diag(1/lambda) Q^T (x - mu_x)
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      a += sigma_xy[i] * eig.q(i, k);
      b += eig.q(i, k) * (x[i] - mu_x[i]);
    }
    acc += a * b / eig.lambda[k];
  }
  return mu_y + acc;
}

GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<const GradCheckTensor> tensors,
                                        const GradCheckOptions& opts) {
  GradCheckReport rep;
  for (const auto& t : tensors) {
    if (t.values.size() != t.analytic.size()) {
      throw ShapeError("finite_difference_check: gradient size mismatch for " + t.name);
    }
    GradCheckEntry e{t.name, 0, 0.0, 0.0};
    const std::size_t size = t.values.size();
    const std::size_t budget = std::max<std::size_t>(opts.max_coords, 64);
    const std::size_t coords = std::min(size, budget);
    for (std::size_t c = 0; c < coords; ++c) {
      const std::size_t i = size <= budget ? c : c * size / coords;
      const double orig = t.values[i];
      t.values[i] = orig + opts.step;
      const double up = loss();
      t.values[i] = orig - opts.step;
      const double down = loss();
      t.values[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = t.analytic[i];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.relative_floor});
      e.max_abs_error = std::max(e.max_abs_error, abs_err);
      e.max_rel_error = std::max(e.max_rel_error, abs_err / denom);
      ++e.coords_checked;
    }
    rep.max_abs_error = std::max(rep.max_abs_error, e.max_abs_error);
    rep.max_rel_error = std::max(rep.max_rel_error, e.max_rel_error);
    rep.tensors.push_back(std::move(e));
  }
  return rep;
}

GradCheckReport check_model_gradients(OLinearParams params, const OLinearConfig& cfg,
                                      const Tensor3& inputs, const Tensor3& upstream,
                                      const GradCheckOptions& opts) {
  auto fwd = forward(inputs, params, cfg);
  const GradientSet grads = backward(fwd.cache, params, upstream);

  std::vector<GradCheckTensor> tensors;
  std::vector<std::span<const double>> analytic;
  visit_weights(grads.grads, cfg, [&](const std::string&, const Matrix& m, bool) {
    analytic.push_back(m.values());
  });
  std::size_t k = 0;
  visit_weights(params.weights, cfg, [&](const std::string& name, Matrix& m, bool trainable) {
    if (!trainable) return;
    tensors.push_back({name, m.values(), analytic.at(k++)});
  });
  if (k != analytic.size()) throw StateError("gradient set does not mirror the trainable tensors");

  auto loss = [&]() {
    const Tensor3 p = predict(inputs, params, cfg);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += upstream.values()[i] * p.values()[i];
    return s;
  };
  return finite_difference_check(loss, tensors, opts);
}

FlopsEstimate flops_estimate(std::uint64_t n, std::uint64_t d, std::uint64_t h) {
  const auto limit = std::numeric_limits<std::uint64_t>::max();
  auto mul = [&](std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > limit / a) throw InputError("flops_estimate: overflow");
    return a * b;
  };
  auto add = [&](std::uint64_t a, std::uint64_t b) {
    if (b > limit - a) throw InputError("flops_estimate: overflow");
    return a + b;
  };
  const std::uint64_t n2d = mul(mul(n, n), d);
  const std::uint64_t nd2 = mul(mul(n, d), d);
  FlopsEstimate f;
  f.normlin_module = add(n2d, mul(2, nd2));
  f.mhsa = add(mul(2, n2d), mul(4, nd2));
  f.n_variates = n;
  f.model_dim = d;
  f.heads = h;
  return f;
}

std::vector<BlockRank> weight_rank_diagnostic(const OLinearParams& params, const OLinearConfig& cfg,
                                              double tol) {
  std::vector<BlockRank> out;
  for (std::size_t l = 0; l < params.weights.blocks.size(); ++l) {
    const Matrix& w = params.weights.blocks[l].normlin_w;
    const Matrix eff = cfg.variant == Variant::olinear_c
                           ? w
                           : normlin_weight(w, cfg.normlin_transform, cfg.normlin_norm).weight;
    const auto rep = rank_report(eff, tol);
    out.push_back({l, rep.numerical_rank, rep.effective_rank});
  }
  return out;
}

}  // namespace olinear
