#pragma once

#include "rln2/image.hpp"

namespace rln2::color {

// Per-pixel HSV guidance channels of an RGB image.
// hue is stored in degrees [0, 360); desaturated pixels get the canonical
// hue 0 so conversions stay deterministic. value == max(R,G,B) exactly.
struct GuidanceMaps {
    Image hue;         // H x W x 1, degrees in [0, 360)
    Image saturation;  // H x W x 1, [0, 1]
    Image value;       // H x W x 1, [0, 1]
};

// Scalar hexcone conversions.
void rgb_to_hsv_pixel(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb_pixel(double h, double s, double v, double& r, double& g, double& b);

GuidanceMaps rgb_to_hsv(const Image& img);
Image hsv_to_rgb(const GuidanceMaps& g);

// CIE L*a*b* under D65, sRGB gamma assumed on the input. L in [0, 100].
Image rgb_to_lab(const Image& img);

// Hue rescaled from degrees to [0, 1] for use as a network feature channel.
Image normalized_hue(const Image& hue_degrees);

}  // namespace rln2::color
