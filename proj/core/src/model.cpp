#include "olinear/model.hpp"

#include <cmath>
#include <cstring>

#include "nn_ops.hpp"
#include "olinear/error.hpp"
#include "olinear/rng.hpp"

namespace olinear {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const Matrix& m, std::size_t r, std::size_t c, const std::string& stage) {
  if (m.rows() != r || m.cols() != c) {
    throw ShapeError(stage + ": expected " + std::to_string(r) + "x" + std::to_string(c) +
                     ", got " + shape_str(m));
  }
}

void expect_linear(const Linear& l, std::size_t in, std::size_t out, const std::string& stage) {
  expect_shape(l.w, out, in, stage + " weight");
  expect_shape(l.b, 1, out, stage + " bias");
}

void validate_params(const OLinearParams& p, const OLinearConfig& cfg) {
  const auto& w = p.weights;
  const std::size_t d = cfg.embed_size, dm = cfg.model_dim, n = cfg.n_variates;
  if (p.q_in.n != cfg.lookback || p.q_in.q.rows() != cfg.lookback) {
    throw ShapeError("input temporal basis: size " + std::to_string(p.q_in.n) +
                     " does not match lookback " + std::to_string(cfg.lookback));
  }
  if (p.q_out.n != cfg.horizon || p.q_out.q.rows() != cfg.horizon) {
    throw ShapeError("output temporal basis: size " + std::to_string(p.q_out.n) +
                     " does not match horizon " + std::to_string(cfg.horizon));
  }
  expect_shape(w.phi_d, 1, d, "dimension extension");
  expect_linear(w.enc, cfg.lookback, dm, "LinearEncode");
  if (w.blocks.size() != cfg.n_blocks) {
    throw ShapeError("blocks: expected " + std::to_string(cfg.n_blocks) + ", got " +
                     std::to_string(w.blocks.size()));
  }
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    const auto& b = w.blocks[l];
    const std::string pre = "block " + std::to_string(l) + " ";
    if (cfg.csl_pre_linear) expect_linear(b.csl_pre, dm, dm, pre + "CSL pre-linear");
    else if (b.csl_pre.present()) throw ShapeError(pre + "CSL pre-linear present but disabled");
    if (cfg.csl_post_linear) expect_linear(b.csl_post, dm, dm, pre + "CSL post-linear");
    else if (b.csl_post.present()) throw ShapeError(pre + "CSL post-linear present but disabled");
    expect_shape(b.normlin_w, n, n, pre + "NormLin");
    expect_shape(b.csl_norm.gamma, 1, dm, pre + "CSL LayerNorm");
    expect_shape(b.csl_norm.beta, 1, dm, pre + "CSL LayerNorm");
    expect_linear(b.isl_lin1, dm, dm, pre + "ISL linear 1");
    expect_linear(b.isl_lin2, dm, dm, pre + "ISL linear 2");
    expect_shape(b.isl_norm.gamma, 1, dm, pre + "ISL LayerNorm");
    expect_shape(b.isl_norm.beta, 1, dm, pre + "ISL LayerNorm");
  }
  expect_linear(w.dec, dm, cfg.horizon, "LinearDecode");
  expect_linear(w.flat, d * cfg.horizon, cfg.horizon, "FlattenLinear");
}

Linear make_linear(std::size_t in, std::size_t out, CounterRng& rng) {
  Linear l{Matrix(out, in), Matrix(1, out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : l.w.values()) v = rng.uniform(-bound, bound);
  return l;
}

LayerNormParams make_norm(std::size_t dm) { return {Matrix(1, dm, 1.0), Matrix(1, dm, 0.0)}; }

Linear zeros_like(const Linear& l) {
  if (!l.present()) return {};
  return {Matrix(l.w.rows(), l.w.cols()), Matrix(l.b.rows(), l.b.cols())};
}

LayerNormParams zeros_like(const LayerNormParams& p) {
  return {Matrix(1, p.gamma.cols()), Matrix(1, p.beta.cols())};
}

std::uint64_t fnv1a(std::uint64_t h, std::span<const double> v) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace

void OLinearConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(n_variates, "n_variates");
  positive(lookback, "lookback");
  positive(horizon, "horizon");
  positive(embed_size, "embed_size");
  positive(model_dim, "model_dim");
  if (lookback < 2) throw ConfigError("lookback must be at least 2 for instance normalization");
}

OLinearParams init_params(const OLinearConfig& cfg, OrthoBasis q_in, OrthoBasis q_out,
                          const CorrEstimate* corr_v, std::uint64_t seed) {
  cfg.validate();
  CounterRng rng(seed, /*stream=*/0);
  const std::size_t d = cfg.embed_size, dm = cfg.model_dim, n = cfg.n_variates;
  Matrix frozen;
  if (cfg.variant == Variant::olinear_c) {
    if (corr_v == nullptr) throw ConfigError("olinear_c requires a cross-variate correlation matrix");
    if (corr_v->matrix.rows() != n) {
      throw ConfigError("cross-variate correlation is " + shape_str(corr_v->matrix) + " for " +
                        std::to_string(n) + " variates");
    }
    frozen = build_olinear_c_weight(*corr_v, cfg.olinear_c_transform);
  }

  OLinearParams p;
  auto& w = p.weights;
  w.phi_d = Matrix(1, d, 1.0);
  w.enc = make_linear(cfg.lookback, dm, rng);
  for (std::size_t l = 0; l < cfg.n_blocks; ++l) {
    BlockParams b;
    if (cfg.csl_pre_linear) b.csl_pre = make_linear(dm, dm, rng);
    b.normlin_w = cfg.variant == Variant::olinear_c ? frozen : Matrix(n, n, 0.0);
    if (cfg.csl_post_linear) b.csl_post = make_linear(dm, dm, rng);
    b.csl_norm = make_norm(dm);
    b.isl_lin1 = make_linear(dm, dm, rng);
    b.isl_lin2 = make_linear(dm, dm, rng);
    b.isl_norm = make_norm(dm);
    w.blocks.push_back(std::move(b));
  }
  w.dec = make_linear(dm, cfg.horizon, rng);
  w.flat = make_linear(d * cfg.horizon, cfg.horizon, rng);
  p.q_in = std::move(q_in);
  p.q_out = std::move(q_out);
  validate_params(p, cfg);
  return p;
}

GradientSet zero_gradients(const Weights& p, const OLinearConfig& cfg) {
  GradientSet g;
  auto& w = g.grads;
  w.phi_d = Matrix(p.phi_d.rows(), p.phi_d.cols());
  w.enc = zeros_like(p.enc);
  for (const auto& b : p.blocks) {
    BlockParams z;
    z.csl_pre = zeros_like(b.csl_pre);
    if (cfg.variant == Variant::olinear) z.normlin_w = Matrix(b.normlin_w.rows(), b.normlin_w.cols());
    z.csl_post = zeros_like(b.csl_post);
    z.csl_norm = zeros_like(b.csl_norm);
    z.isl_lin1 = zeros_like(b.isl_lin1);
    z.isl_lin2 = zeros_like(b.isl_lin2);
    z.isl_norm = zeros_like(b.isl_norm);
    w.blocks.push_back(std::move(z));
  }
  w.dec = zeros_like(p.dec);
  w.flat = zeros_like(p.flat);
  return g;
}

RevInResult revin_normalize(const Tensor3& x, double eps) {
  const std::size_t b = x.d0(), n = x.d1(), t = x.d2();
  if (t < 2) throw ShapeError("RevIN: lookback must be at least 2");
  RevInResult r{Tensor3(b, n, t), RevInState{Matrix(b, n), Matrix(b, n), eps}};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto f = x.fiber(i, j);
      double mean = 0.0;
      for (double v : f) mean += v;
      mean /= static_cast<double>(t);
      double var = 0.0;
      for (double v : f) var += (v - mean) * (v - mean);
      var /= static_cast<double>(t);
      const double sd = std::sqrt(var + eps);
      r.state.mean(i, j) = mean;
      r.state.std(i, j) = sd;
      auto o = r.normalized.fiber(i, j);
      for (std::size_t k = 0; k < t; ++k) o[k] = (f[k] - mean) / sd;
    }
  }
  return r;
}

Tensor3 revin_denormalize(const Tensor3& y, const RevInState& state) {
  if (y.d0() != state.mean.rows() || y.d1() != state.mean.cols()) {
    throw ShapeError("RevIN denormalize: statistics are " + shape_str(state.mean) +
                     " but predictions are " + std::to_string(y.d0()) + "x" + std::to_string(y.d1()));
  }
  Tensor3 out(y.d0(), y.d1(), y.d2());
  for (std::size_t i = 0; i < y.d0(); ++i) {
    for (std::size_t j = 0; j < y.d1(); ++j) {
      const auto f = y.fiber(i, j);
      auto o = out.fiber(i, j);
      for (std::size_t k = 0; k < f.size(); ++k) o[k] = f[k] * state.std(i, j) + state.mean(i, j);
    }
  }
  return out;
}

Tensor3 dimension_extend(const Tensor3& x, const Matrix& phi_d) {
  if (phi_d.rows() != 1 || phi_d.empty()) throw ShapeError("dimension extension: phi_d must be 1 x d");
  const std::size_t bn = x.d0() * x.d1(), d = phi_d.cols(), t = x.d2();
  Tensor3 out(bn, d, t);
  const auto xv = x.values();
  for (std::size_t s = 0; s < bn; ++s) {
    for (std::size_t k = 0; k < d; ++k) {
      auto o = out.fiber(s, k);
      const double phi = phi_d(0, k);
      for (std::size_t i = 0; i < t; ++i) o[i] = xv[s * t + i] * phi;
    }
  }
  return out;
}

Tensor3 linear_forward(const Tensor3& x, const Linear& lin) {
  if (x.d2() != lin.w.cols()) {
    throw ShapeError("linear: input width " + std::to_string(x.d2()) + " vs weight " + shape_str(lin.w));
  }
  Tensor3 out(x.d0(), x.d1(), lin.w.rows());
  detail::linear_rows(x.values(), x.d0() * x.d1(), lin, out.values());
  return out;
}

CslResult csl_forward(const Tensor3& h, const BlockParams& p, const OLinearConfig& cfg) {
  const std::size_t n = p.normlin_w.rows();
  if (n == 0 || h.d0() % n != 0) {
    throw ShapeError("CSL: leading axis " + std::to_string(h.d0()) + " is not a multiple of " +
                     std::to_string(n) + " variates");
  }
  const std::size_t batch = h.d0() / n;
  const std::size_t rows = h.d0() * h.d1();
  const std::size_t slab = h.d1() * h.d2();

  CslResult r;
  auto& c = r.cache;
  c.n_variates = n;
  c.h = h;
  c.u = p.csl_pre.present() ? linear_forward(h, p.csl_pre) : h;
  c.mixing = cfg.variant == Variant::olinear_c
                 ? p.normlin_w
                 : normlin_weight(p.normlin_w, cfg.normlin_transform, cfg.normlin_norm).weight;
  c.v = Tensor3(h.d0(), h.d1(), h.d2());
  for (std::size_t b = 0; b < batch; ++b) {
    matmul_into(c.mixing.values(), c.u.values().subspan(b * n * slab, n * slab),
                c.v.values().subspan(b * n * slab, n * slab), n, n, slab);
  }
  Tensor3 s = p.csl_post.present() ? linear_forward(c.v, p.csl_post) : c.v;
  for (std::size_t i = 0; i < s.size(); ++i) s.values()[i] += h.values()[i];
  r.out = Tensor3(h.d0(), h.d1(), h.d2());
  detail::layer_norm_rows(s.values(), rows, p.csl_norm, r.out.values(), c.norm);
  return r;
}

Tensor3 csl_backward(const CslCache& c, const Tensor3& d_out, const BlockParams& p,
                     const OLinearConfig& cfg, BlockParams& g) {
  const Tensor3& h = c.h;
  const std::size_t n = c.n_variates;
  const std::size_t batch = h.d0() / n;
  const std::size_t rows = h.d0() * h.d1();
  const std::size_t width = h.d2();
  const std::size_t slab = h.d1() * width;

  Tensor3 d_s(h.d0(), h.d1(), width);
  detail::layer_norm_rows_backward(c.norm, d_out.values(), rows, p.csl_norm, g.csl_norm, d_s.values());

  Tensor3 d_v(h.d0(), h.d1(), width);
  if (p.csl_post.present()) {
    detail::linear_rows_backward(c.v.values(), d_s.values(), rows, p.csl_post, g.csl_post, d_v.values());
  } else {
    d_v = d_s;
  }

  Matrix d_mix(n, n);
  Tensor3 d_u(h.d0(), h.d1(), width);
  const Matrix mix_t = c.mixing.transposed();
  for (std::size_t b = 0; b < batch; ++b) {
    const auto dv = d_v.values().subspan(b * n * slab, n * slab);
    const auto u = c.u.values().subspan(b * n * slab, n * slab);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        const double* a = dv.data() + i * slab;
        const double* bb = u.data() + j * slab;
        for (std::size_t k = 0; k < slab; ++k) acc += a[k] * bb[k];
        d_mix(i, j) += acc;
      }
    }
    matmul_into(mix_t.values(), dv, d_u.values().subspan(b * n * slab, n * slab), n, n, slab);
  }
  if (cfg.variant == Variant::olinear) {
    const Matrix dw = normlin_weight_backward(p.normlin_w, cfg.normlin_transform, cfg.normlin_norm, d_mix);
    for (std::size_t i = 0; i < dw.size(); ++i) g.normlin_w.values()[i] += dw.values()[i];
  }

  Tensor3 d_h = d_s;
  if (p.csl_pre.present()) {
    Tensor3 d_pre(h.d0(), h.d1(), width);
    detail::linear_rows_backward(h.values(), d_u.values(), rows, p.csl_pre, g.csl_pre, d_pre.values());
    for (std::size_t i = 0; i < d_h.size(); ++i) d_h.values()[i] += d_pre.values()[i];
  } else {
    for (std::size_t i = 0; i < d_h.size(); ++i) d_h.values()[i] += d_u.values()[i];
  }
  return d_h;
}

IslResult isl_forward(const Tensor3& h, const BlockParams& p) {
  IslResult r;
  auto& c = r.cache;
  c.h = h;
  c.a = linear_forward(h, p.isl_lin1);
  c.g = Tensor3(c.a.d0(), c.a.d1(), c.a.d2());
  for (std::size_t i = 0; i < c.a.size(); ++i) c.g.values()[i] = gelu(c.a.values()[i]);
  Tensor3 s = linear_forward(c.g, p.isl_lin2);
  for (std::size_t i = 0; i < s.size(); ++i) s.values()[i] += h.values()[i];
  r.out = Tensor3(h.d0(), h.d1(), h.d2());
  detail::layer_norm_rows(s.values(), h.d0() * h.d1(), p.isl_norm, r.out.values(), c.norm);
  return r;
}

Tensor3 isl_backward(const IslCache& c, const Tensor3& d_out, const BlockParams& p, BlockParams& g) {
  const std::size_t rows = c.h.d0() * c.h.d1();
  Tensor3 d_s(c.h.d0(), c.h.d1(), c.h.d2());
  detail::layer_norm_rows_backward(c.norm, d_out.values(), rows, p.isl_norm, g.isl_norm, d_s.values());
  Tensor3 d_g(c.g.d0(), c.g.d1(), c.g.d2());
  detail::linear_rows_backward(c.g.values(), d_s.values(), rows, p.isl_lin2, g.isl_lin2, d_g.values());
  for (std::size_t i = 0; i < d_g.size(); ++i) d_g.values()[i] *= gelu_grad(c.a.values()[i]);
  Tensor3 d_h(c.h.d0(), c.h.d1(), c.h.d2());
  detail::linear_rows_backward(c.h.values(), d_g.values(), rows, p.isl_lin1, g.isl_lin1, d_h.values());
  for (std::size_t i = 0; i < d_h.size(); ++i) d_h.values()[i] += d_s.values()[i];
  return d_h;
}

std::uint64_t fingerprint(const OLinearParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  OLinearConfig any;
  any.variant = Variant::olinear;
  visit_weights(params.weights, any, [&](const std::string&, const Matrix& m, bool) {
    h = fnv1a(h, m.values());
  });
  h = fnv1a(h, params.q_in.q.values());
  h = fnv1a(h, params.q_out.q.values());
  return h;
}

ForwardResult forward(const Tensor3& inputs, const OLinearParams& params, const OLinearConfig& cfg) {
  cfg.validate();
  if (inputs.d1() != cfg.n_variates || inputs.d2() != cfg.lookback || inputs.d0() == 0) {
    throw ShapeError("input batch: expected B x " + std::to_string(cfg.n_variates) + " x " +
                     std::to_string(cfg.lookback) + ", got " + std::to_string(inputs.d0()) + "x" +
                     std::to_string(inputs.d1()) + "x" + std::to_string(inputs.d2()));
  }
  validate_params(params, cfg);
  const auto& w = params.weights;
  const std::size_t batch = inputs.d0();
  const std::size_t bn = batch * cfg.n_variates;

  ForwardResult r;
  auto& c = r.cache;
  c.config = cfg;
  c.batch = batch;
  c.fingerprint = fingerprint(params);

  auto rev = revin_normalize(inputs);
  c.revin = std::move(rev.state);
  c.x_norm = std::move(rev.normalized);
  c.z = apply_temporal(dimension_extend(c.x_norm, w.phi_d), params.q_in);
  Tensor3 h = linear_forward(c.z, w.enc);
  for (const auto& blk : w.blocks) {
    auto cs = csl_forward(h, blk, cfg);
    c.csl.push_back(std::move(cs.cache));
    auto is = isl_forward(cs.out, blk);
    c.isl.push_back(std::move(is.cache));
    h = std::move(is.out);
  }
  c.h_final = std::move(h);
  c.y_time = invert_temporal(linear_forward(c.h_final, w.dec), params.q_out);

  const Tensor3 flat_in(bn, 1, cfg.embed_size * cfg.horizon,
                        std::vector<double>(c.y_time.values().begin(), c.y_time.values().end()));
  const Tensor3 flat_out = linear_forward(flat_in, w.flat);
  const Tensor3 normalized(batch, cfg.n_variates, cfg.horizon,
                           std::vector<double>(flat_out.values().begin(), flat_out.values().end()));
  r.predictions = revin_denormalize(normalized, c.revin);
  if (!all_finite(r.predictions.values())) throw NumericalError("forward produced non-finite predictions");
  c.valid = true;
  return r;
}

Tensor3 predict(const Tensor3& inputs, const OLinearParams& params, const OLinearConfig& cfg) {
  return forward(inputs, params, cfg).predictions;
}

GradientSet backward(const ForwardCache& c, const OLinearParams& params, const Tensor3& d_pred) {
  if (!c.valid) throw StateError("backward: cache does not hold a completed forward pass");
  const auto& cfg = c.config;
  if (d_pred.d0() != c.batch || d_pred.d1() != cfg.n_variates || d_pred.d2() != cfg.horizon) {
    throw StateError("backward: gradient shape does not match the cached forward pass");
  }
  if (fingerprint(params) != c.fingerprint) {
    throw StateError("backward: parameters changed since the forward pass (stale cache)");
  }
  const auto& w = params.weights;
  GradientSet gs = zero_gradients(w, cfg);
  auto& g = gs.grads;
  const std::size_t bn = c.batch * cfg.n_variates;
  const std::size_t d = cfg.embed_size;

  // RevIN denormalization: y = out * std + mean.
  Tensor3 d_flat_out(bn, 1, cfg.horizon);
  for (std::size_t b = 0; b < c.batch; ++b)
    for (std::size_t n = 0; n < cfg.n_variates; ++n) {
      const double sd = c.revin.std(b, n);
      const auto src = d_pred.fiber(b, n);
      auto dst = d_flat_out.fiber(b * cfg.n_variates + n, 0);
      for (std::size_t t = 0; t < cfg.horizon; ++t) dst[t] = src[t] * sd;
    }

  Tensor3 d_y_time(bn, d, cfg.horizon);
  detail::linear_rows_backward(c.y_time.values(), d_flat_out.values(), bn, w.flat, g.flat,
                               d_y_time.values());

  const Tensor3 d_dec_out = apply_temporal(d_y_time, params.q_out);
  Tensor3 d_h(bn, d, cfg.model_dim);
  detail::linear_rows_backward(c.h_final.values(), d_dec_out.values(), bn * d, w.dec, g.dec,
                               d_h.values());

  for (std::size_t l = w.blocks.size(); l-- > 0;) {
    d_h = isl_backward(c.isl[l], d_h, w.blocks[l], g.blocks[l]);
    d_h = csl_backward(c.csl[l], d_h, w.blocks[l], cfg, g.blocks[l]);
  }

  Tensor3 d_z(bn, d, cfg.lookback);
  detail::linear_rows_backward(c.z.values(), d_h.values(), bn * d, w.enc, g.enc, d_z.values());
  const Tensor3 d_ext = invert_temporal(d_z, params.q_in);

  const auto xv = c.x_norm.values();
  for (std::size_t s = 0; s < bn; ++s) {
    for (std::size_t k = 0; k < d; ++k) {
      const auto f = d_ext.fiber(s, k);
      double acc = 0.0;
      for (std::size_t t = 0; t < cfg.lookback; ++t) acc += f[t] * xv[s * cfg.lookback + t];
      g.phi_d(0, k) += acc;
    }
  }
  return gs;
}

}  // namespace olinear
