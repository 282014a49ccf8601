#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "olinear/linalg.hpp"
#include "olinear/model.hpp"

namespace olinear {

/// Forecast accuracy over a set of windows. r and MASE are computed per
/// (window, variate), averaged over windows per variate, then over variates;
/// pairs with a constant target horizon are excluded and counted.
struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double pearson_r = 0.0;
  double mase = 0.0;
  std::size_t n_windows = 0;
  std::size_t r2_excluded_variates = 0;
  std::size_t r_excluded_pairs = 0;
  std::size_t mase_excluded_pairs = 0;
};

/// preds and targets are B x N x tau. MASE needs tau >= 2.
MetricsReport metrics(const Tensor3& preds, const Tensor3& targets);

/// mu_y + sigma_xy^T sigma_x^{-1} (x - mu_x), inverting sigma_x through its
/// eigendecomposition. Throws InputError unless sigma_x is symmetric positive
/// definite (smallest eigenvalue above 1e-12).
double conditional_gaussian_mean(std::span<const double> mu_x, double mu_y, const Matrix& sigma_x,
                                 std::span<const double> sigma_xy, std::span<const double> x);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct GradCheckTensor {
  std::string name;
  std::span<double> values;          // perturbed in place, restored afterwards
  std::span<const double> analytic;  // gradient to compare against
};

struct GradCheckOptions {
  double step = 1e-6;
  std::size_t max_coords = 256;  // per tensor; larger tensors are strided, never below 64
  /// Denominator floor for relative error: |a - f| / max(|a|, |f|, floor).
  double relative_floor = 1e-3;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Central differences of `loss` against the supplied analytic gradients.
GradCheckReport finite_difference_check(const std::function<double()>& loss,
                                        std::span<const GradCheckTensor> tensors,
                                        const GradCheckOptions& opts = {});

/// Checks backward() for the scalar sum(upstream * predict(inputs)) over every
/// trainable tensor of `params`.
GradCheckReport check_model_gradients(OLinearParams params, const OLinearConfig& cfg,
                                      const Tensor3& inputs, const Tensor3& upstream,
                                      const GradCheckOptions& opts = {});

// ---------------------------------------------------------------------------
// Diagnostics

/// FLOPs of the NormLin module (N^2 D + 2 N D^2) and of multi-head
/// self-attention (2 N^2 D + 4 N D^2) for N tokens of width D.
struct FlopsEstimate {
  std::uint64_t normlin_module = 0;
  std::uint64_t mhsa = 0;
  std::uint64_t n_variates = 0;
  std::uint64_t model_dim = 0;
  std::uint64_t heads = 0;
};

FlopsEstimate flops_estimate(std::uint64_t n_variates, std::uint64_t model_dim, std::uint64_t heads);

struct BlockRank {
  std::size_t block = 0;
  std::size_t numerical_rank = 0;
  double effective_rank = 0.0;
};

/// Rank summary of each block's effective (normalized) NormLin weight.
std::vector<BlockRank> weight_rank_diagnostic(const OLinearParams& params, const OLinearConfig& cfg,
                                              double tol = 1e-6);

}  // namespace olinear
