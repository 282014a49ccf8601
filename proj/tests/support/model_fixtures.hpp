#pragma once

#include <array>
#include <cstdint>

#include "olinear/model.hpp"

namespace olinear::testing {

inline constexpr std::array<NormLinTransform, 5> kAllTransforms = {
    NormLinTransform::softplus, NormLinTransform::softmax, NormLinTransform::sigmoid, NormLinTransform::relu,
    NormLinTransform::identity};

/// N=2, T=8, tau=4, d=2, D=8, L=1 with an eigen basis.
OLinearConfig small_config(Variant variant);

/// Initialized parameters pushed away from their symmetric starting point:
/// random phi, biases and LayerNorm affines, and NormLin weights whose
/// entries are bounded away from zero with at least one positive entry per
/// row (so relu and |.| stay differentiable and no row falls back).
/// Bases and the olinear_c correlation come from synthetic AR(1) data.
OLinearParams random_params(const OLinearConfig& cfg, std::uint64_t seed);

}  // namespace olinear::testing
