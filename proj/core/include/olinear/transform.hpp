#pragma once

#include <optional>
#include <string>
#include <vector>

#include "olinear/data.hpp"
#include "olinear/linalg.hpp"

namespace olinear {

enum class BasisMethod { eigen, fourier, identity };

[[nodiscard]] const char* to_string(BasisMethod m) noexcept;
[[nodiscard]] BasisMethod parse_basis_method(const std::string& s);

/// Frozen orthogonal n x n basis applied along the temporal axis.
struct OrthoBasis {
  Matrix q;
  std::optional<std::vector<double>> eigenvalues;  // set for method == eigen
  BasisMethod method = BasisMethod::identity;
  std::size_t n = 0;
};

/// Eigen bases diagonalize `corr` (whose window must equal n); fourier is
/// the real orthonormal trigonometric basis; identity is I_n.
OrthoBasis build_basis(const CorrEstimate* corr, BasisMethod method, std::size_t n);

/// Real orthonormal DFT basis: constant column, then cos/sin pairs in order
/// of increasing frequency, then the alternating Nyquist column when n is even.
Matrix fourier_basis(std::size_t n);

/// Projects every last-axis fiber onto the basis columns (q^T x).
Tensor3 apply_temporal(const Tensor3& x, const OrthoBasis& basis);

/// Maps coefficients back (q x). Exact inverse of apply_temporal.
Tensor3 invert_temporal(const Tensor3& x, const OrthoBasis& basis);

/// Mean |off-diagonal| of the Pearson correlation matrix of the transformed
/// lookback windows, treating every (window, variate) fiber as one sample.
double decorrelation_score(const WindowBatch& windows, const OrthoBasis& basis);

/// Correlation estimates and bases for one dataset / window configuration.
struct PreparedBases {
  std::optional<CorrEstimate> corr_in;   // lookback x lookback, eigen only
  std::optional<CorrEstimate> corr_out;  // horizon x horizon, eigen only
  CorrEstimate corr_v;                   // N x N cross-variate
  OrthoBasis q_in;
  OrthoBasis q_out;
};

/// Estimates the lagged temporal correlation for both window lengths from the first
/// `source_fraction` of the training split and builds the input and output bases.
PreparedBases prepare_bases(const TimeSeriesDataset& ds, BasisMethod method, std::size_t lookback,
                            std::size_t horizon, double source_fraction = 1.0);

}  // namespace olinear
