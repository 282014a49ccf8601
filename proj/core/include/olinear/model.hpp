#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "olinear/data.hpp"
#include "olinear/linalg.hpp"
#include "olinear/transform.hpp"

namespace olinear {

enum class NormLinTransform { softplus, softmax, sigmoid, relu, identity };
enum class NormLinNorm { l1, l2 };
enum class Variant { olinear, olinear_c };

[[nodiscard]] const char* to_string(NormLinTransform t) noexcept;
[[nodiscard]] const char* to_string(NormLinNorm n) noexcept;
[[nodiscard]] const char* to_string(Variant v) noexcept;
[[nodiscard]] NormLinTransform parse_normlin_transform(const std::string& s);
[[nodiscard]] NormLinNorm parse_normlin_norm(const std::string& s);
[[nodiscard]] Variant parse_variant(const std::string& s);

struct OLinearConfig {
  std::size_t n_variates = 1;
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t embed_size = 16;
  std::size_t model_dim = 128;
  std::size_t n_blocks = 1;
  NormLinTransform normlin_transform = NormLinTransform::softplus;
  NormLinNorm normlin_norm = NormLinNorm::l1;
  bool csl_pre_linear = true;
  bool csl_post_linear = true;
  Variant variant = Variant::olinear;
  // Transform applied to the cross-variate correlation rows for olinear_c
  // (always followed by row-wise L1 normalization).
  NormLinTransform olinear_c_transform = NormLinTransform::softmax;
  BasisMethod basis_method = BasisMethod::eigen;

  /// Throws ConfigError for zero dimensions.
  void validate() const;
};

/// y = x W^T + b applied to the last axis. w is out x in, b is 1 x out.
struct Linear {
  Matrix w;
  Matrix b;

  [[nodiscard]] bool present() const noexcept { return !w.empty(); }
};

struct LayerNormParams {
  Matrix gamma;  // 1 x D
  Matrix beta;   // 1 x D
};

struct BlockParams {
  Linear csl_pre;    // absent when the pre-linear is disabled
  Matrix normlin_w;  // N x N; for olinear_c the frozen effective weight
  Linear csl_post;   // absent when the post-linear is disabled
  LayerNormParams csl_norm;
  Linear isl_lin1;
  Linear isl_lin2;
  LayerNormParams isl_norm;
};

/// Every tensor the optimizer may touch, plus the frozen olinear_c weight.
struct Weights {
  Matrix phi_d;  // 1 x d
  Linear enc;    // T -> D
  std::vector<BlockParams> blocks;
  Linear dec;    // D -> tau
  Linear flat;   // d*tau -> tau, shared across variates
};

struct OLinearParams {
  Weights weights;
  OrthoBasis q_in;   // T x T
  OrthoBasis q_out;  // tau x tau
};

/// Mirrors Weights; frozen tensors are left empty.
struct GradientSet {
  Weights grads;
};

/// Calls f(name, tensor, trainable) for each tensor present in `w`, in a
/// fixed order. Names are stable and used by the checkpoint format.
template <class W, class F>
void visit_weights(W& w, const OLinearConfig& cfg, F&& f) {
  auto linear = [&](const std::string& prefix, auto& lin) {
    if (lin.w.empty()) return;
    f(prefix + ".w", lin.w, true);
    f(prefix + ".b", lin.b, true);
  };
  auto norm = [&](const std::string& prefix, auto& ln) {
    f(prefix + ".gamma", ln.gamma, true);
    f(prefix + ".beta", ln.beta, true);
  };
  f(std::string("phi_d"), w.phi_d, true);
  linear("enc", w.enc);
  for (std::size_t l = 0; l < w.blocks.size(); ++l) {
    auto& blk = w.blocks[l];
    const std::string p = "blocks." + std::to_string(l) + ".";
    linear(p + "csl_pre", blk.csl_pre);
    if (!blk.normlin_w.empty()) f(p + "normlin_w", blk.normlin_w, cfg.variant == Variant::olinear);
    linear(p + "csl_post", blk.csl_post);
    norm(p + "csl_norm", blk.csl_norm);
    linear(p + "isl_lin1", blk.isl_lin1);
    linear(p + "isl_lin2", blk.isl_lin2);
    norm(p + "isl_norm", blk.isl_norm);
  }
  linear("dec", w.dec);
  linear("flat", w.flat);
}

/// Fresh parameters: linear weights uniform in +-1/sqrt(fan_in), zero biases,
/// unit LayerNorm gain, all-ones phi_d, zero NormLin weights. For olinear_c,
/// `corr_v` supplies the frozen mixing matrix.
OLinearParams init_params(const OLinearConfig& cfg, OrthoBasis q_in, OrthoBasis q_out,
                          const CorrEstimate* corr_v, std::uint64_t seed);

/// Zero-filled gradient buffers shaped like the trainable tensors of `p`.
GradientSet zero_gradients(const Weights& p, const OLinearConfig& cfg);

// ---------------------------------------------------------------------------
// Stages

struct RevInState {
  Matrix mean;  // B x N
  Matrix std;   // B x N, sqrt(var + eps)
  double eps = 1e-5;
};

struct RevInResult {
  Tensor3 normalized;
  RevInState state;
};

RevInResult revin_normalize(const Tensor3& x, double eps = 1e-5);
Tensor3 revin_denormalize(const Tensor3& y, const RevInState& state);

/// (B x N x T) -> ((B*N) x d x T), out[(b,n), k, t] = x[b, n, t] * phi[k].
Tensor3 dimension_extend(const Tensor3& x, const Matrix& phi_d);

struct NormLinWeight {
  Matrix weight;
  std::size_t fallback_rows = 0;  // rows whose norm vanished; set to 1/N
};

/// Entrywise transform followed by row-wise L1 or L2 normalization.
NormLinWeight normlin_weight(const Matrix& w, NormLinTransform transform, NormLinNorm norm);

/// Gradient of a scalar with respect to the raw weight, given its gradient
/// with respect to the normalized weight.
Matrix normlin_weight_backward(const Matrix& w, NormLinTransform transform, NormLinNorm norm,
                               const Matrix& d_weight);

/// Diag(c) - c c^T with c = softmax(a).
Matrix softmax_jacobian(std::span<const double> a);

/// Jacobian of a -> Norm_L1(Softplus(a)) in the closed form
/// (1/|b|_1) (Diag(sigmoid(a)) - (b/|b|_1) sigmoid(a)^T), b = softplus(a).
Matrix normlin_jacobian(std::span<const double> a);

/// Jacobian of one row map for any transform / norm pair.
Matrix normlin_row_jacobian(std::span<const double> a, NormLinTransform transform, NormLinNorm norm);

/// The frozen olinear_c mixing matrix: transform(cross-variate correlation) with row-wise L1
/// normalization (softmax by default).
Matrix build_olinear_c_weight(const CorrEstimate& corr_v,
                              NormLinTransform transform = NormLinTransform::softmax);

[[nodiscard]] double gelu(double x) noexcept;
[[nodiscard]] double gelu_grad(double x) noexcept;

struct LayerNormCache {
  std::vector<double> xhat;
  std::vector<double> inv_std;  // one per row
};

struct CslCache {
  std::size_t n_variates = 0;
  Tensor3 h;      // block input
  Tensor3 u;      // after the pre-linear (or h)
  Tensor3 v;      // after variate mixing
  Matrix mixing;  // effective N x N weight
  LayerNormCache norm;
};

struct IslCache {
  Tensor3 h;
  Tensor3 a;  // after lin1
  Tensor3 g;  // after GELU
  LayerNormCache norm;
};

struct CslResult {
  Tensor3 out;
  CslCache cache;
};

struct IslResult {
  Tensor3 out;
  IslCache cache;
};

/// h is ((B*N) x d x D). Mixes the N axis with the NormLin weight (the same
/// matrix at every (d, D) position) between the optional pre/post linears,
/// then applies the residual and LayerNorm over D.
CslResult csl_forward(const Tensor3& h, const BlockParams& p, const OLinearConfig& cfg);
IslResult isl_forward(const Tensor3& h, const BlockParams& p);

/// Accumulate parameter gradients into `g` and return the input gradient.
Tensor3 csl_backward(const CslCache& cache, const Tensor3& d_out, const BlockParams& p,
                     const OLinearConfig& cfg, BlockParams& g);
Tensor3 isl_backward(const IslCache& cache, const Tensor3& d_out, const BlockParams& p,
                     BlockParams& g);

/// Applies a Linear to every last-axis fiber.
Tensor3 linear_forward(const Tensor3& x, const Linear& lin);

// ---------------------------------------------------------------------------
// Whole model

struct ForwardCache {
  OLinearConfig config;
  std::uint64_t fingerprint = 0;
  std::size_t batch = 0;
  RevInState revin;
  Tensor3 x_norm;     // B x N x T
  Tensor3 z;          // (B*N) x d x T, after q_in
  std::vector<CslCache> csl;
  std::vector<IslCache> isl;
  Tensor3 h_final;    // (B*N) x d x D
  Tensor3 y_time;     // (B*N) x d x tau, after q_out
  bool valid = false;
};

struct ForwardResult {
  Tensor3 predictions;  // B x N x tau
  ForwardCache cache;
};

/// Full pipeline on a B x N x T batch. Shape errors name the stage.
ForwardResult forward(const Tensor3& inputs, const OLinearParams& params, const OLinearConfig& cfg);

/// forward() without retaining intermediates.
Tensor3 predict(const Tensor3& inputs, const OLinearParams& params, const OLinearConfig& cfg);

/// Reverse-mode gradients of sum(d_predictions * predictions). Throws
/// StateError when `params` changed since the forward pass that built
/// `cache`, or when the cache does not match the gradient shape.
GradientSet backward(const ForwardCache& cache, const OLinearParams& params,
                     const Tensor3& d_predictions);

/// Hash of every weight and basis byte; identifies a parameter state.
[[nodiscard]] std::uint64_t fingerprint(const OLinearParams& params);

}  // namespace olinear
