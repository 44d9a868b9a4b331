#pragma once

#include "rln2/image.hpp"

namespace rln2::retinex {

// Multiplicative decomposition I = L * R. Luminance is the HSV value channel
// floored at eps, so reflectance = I / L stays in [0, 1] and the product
// reconstructs the source exactly.
struct RetinexPair {
    Image luminance;    // H x W x 1, values in [eps, 1]
    Image reflectance;  // H x W x 3, nonnegative
};

// Additive compensation terms for the two components.
struct ResidualPair {
    Image d_luminance;    // H x W x 1
    Image d_reflectance;  // H x W x 3
};

constexpr double kDefaultEps = 1e-4;

RetinexPair decompose(const Image& img, double eps = kDefaultEps);

// (L + dL) * (R + dR), elementwise with L broadcast over channels,
// clamped to [0, 1] at the very end only.
Image recompose(const RetinexPair& pair, const ResidualPair& residual);

// Same product without the final clamp (training-side output).
Image recompose_unclamped(const RetinexPair& pair, const ResidualPair& residual);

ResidualPair zero_residual(int h, int w);

}  // namespace rln2::retinex
