#pragma once

#include <cstdint>
#include <filesystem>

#include "olinear/data.hpp"
#include "olinear/linalg.hpp"

namespace olinear::testing {

/// N independent stationary AR(1) series x_t = rho x_{t-1} + sqrt(1 - rho^2) e_t
/// with unit marginal variance, started from the stationary distribution.
Matrix ar1_series(std::size_t n_variates, std::size_t steps, double rho, std::uint64_t seed);

/// sin(2 pi t / period + phase_v) plus Gaussian noise whose variance makes
/// signal power / noise power equal `snr`. Variate v has phase v * pi / 3.
Matrix sinusoid_series(std::size_t n_variates, std::size_t steps, double period, double snr,
                       std::uint64_t seed);

Matrix white_noise(std::size_t n_variates, std::size_t steps, std::uint64_t seed);

TimeSeriesDataset as_dataset(const Matrix& values, SplitRatios ratios = {});

/// Writes a CSV with an integer timestamp column and columns v0..v{N-1}.
void write_csv(const std::filesystem::path& path, const Matrix& values);

/// Random B x N x T tensor with entries uniform in [lo, hi).
Tensor3 random_tensor(std::size_t b, std::size_t n, std::size_t t, std::uint64_t seed, double lo = -1.0,
                      double hi = 1.0);

/// Random matrix with entries uniform in [lo, hi).
Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace olinear::testing
