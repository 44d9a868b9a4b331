#include "rln2/retinex.hpp"

#include <algorithm>

namespace rln2::retinex {

RetinexPair decompose(const Image& img, double eps) {
    if (img.channels() != 3) throw ShapeError("decompose: expected 3-channel image");
    if (eps <= 0.0) throw ValueError("decompose: eps must be positive");
    const int h = img.height(), w = img.width();
    RetinexPair p{Image(h, w, 1), Image(h, w, 3)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double v = std::max(img.at(y, x, 0), std::max(img.at(y, x, 1), img.at(y, x, 2)));
            double lum = std::max(v, eps);
            p.luminance.at(y, x, 0) = lum;
            for (int c = 0; c < 3; ++c) p.reflectance.at(y, x, c) = img.at(y, x, c) / lum;
        }
    return p;
}

static Image product(const RetinexPair& pair, const ResidualPair& residual, bool clamp) {
    check_same_shape(pair.luminance, residual.d_luminance, "recompose");
    check_same_shape(pair.reflectance, residual.d_reflectance, "recompose");
    if (pair.luminance.height() != pair.reflectance.height() ||
        pair.luminance.width() != pair.reflectance.width())
        throw ShapeError("recompose: luminance/reflectance extent mismatch");
    const int h = pair.luminance.height(), w = pair.luminance.width();
    Image out(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double lum = pair.luminance.at(y, x, 0) + residual.d_luminance.at(y, x, 0);
            for (int c = 0; c < 3; ++c) {
                double refl = pair.reflectance.at(y, x, c) + residual.d_reflectance.at(y, x, c);
                double v = lum * refl;
                out.at(y, x, c) = clamp ? clamp01(v) : v;
            }
        }
    return out;
}

Image recompose(const RetinexPair& pair, const ResidualPair& residual) {
    return product(pair, residual, true);
}

Image recompose_unclamped(const RetinexPair& pair, const ResidualPair& residual) {
    return product(pair, residual, false);
}

ResidualPair zero_residual(int h, int w) {
    return ResidualPair{Image(h, w, 1), Image(h, w, 3)};
}

}  // namespace rln2::retinex
