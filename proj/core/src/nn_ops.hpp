#pragma once

// Row-level kernels shared by the model forward and backward passes.

#include <cstddef>
#include <span>

#include "olinear/model.hpp"

namespace olinear::detail {

/// out(rows x out_dim) = in(rows x in_dim) * w^T + b
void linear_rows(std::span<const double> in, std::size_t rows, const Linear& lin,
                 std::span<double> out);

/// Accumulates dW, db into `g` and writes d_in (overwritten) when non-empty.
void linear_rows_backward(std::span<const double> in, std::span<const double> d_out,
                          std::size_t rows, const Linear& lin, Linear& g, std::span<double> d_in);

/// LayerNorm over rows of width `width`; eps 1e-5.
void layer_norm_rows(std::span<const double> x, std::size_t rows, const LayerNormParams& p,
                     std::span<double> out, LayerNormCache& cache);

/// Accumulates d_gamma, d_beta; writes d_x (overwritten).
void layer_norm_rows_backward(const LayerNormCache& cache, std::span<const double> d_out,
                              std::size_t rows, const LayerNormParams& p, LayerNormParams& g,
                              std::span<double> d_x);

constexpr double kLayerNormEps = 1e-5;

}  // namespace olinear::detail
