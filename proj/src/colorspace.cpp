#include "rln2/colorspace.hpp"

#include <algorithm>
#include <cmath>

namespace rln2::color {

void rgb_to_hsv_pixel(double r, double g, double b, double& h, double& s, double& v) {
    double mx = std::max(r, std::max(g, b));
    double mn = std::min(r, std::min(g, b));
    double d = mx - mn;

    v = mx;
    s = (mx > 0.0) ? d / mx : 0.0;

    if (d <= 0.0) {
        h = 0.0;  // achromatic: canonical hue
        return;
    }
    if (mx == r)
        h = 60.0 * ((g - b) / d);
    else if (mx == g)
        h = 60.0 * ((b - r) / d + 2.0);
    else
        h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
}

void hsv_to_rgb_pixel(double h, double s, double v, double& r, double& g, double& b) {
    if (h < 0.0 || h >= 360.0) throw ValueError("hue out of [0, 360)");
    if (s <= 0.0) {
        r = g = b = v;
        return;
    }
    double hp = h / 60.0;
    int sector = static_cast<int>(hp);
    double f = hp - sector;
    double p = v * (1.0 - s);
    double q = v * (1.0 - s * f);
    double t = v * (1.0 - s * (1.0 - f));
    switch (sector % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

GuidanceMaps rgb_to_hsv(const Image& img) {
    if (img.channels() != 3) throw ShapeError("rgb_to_hsv: expected 3-channel image");
    const int h = img.height(), w = img.width();
    GuidanceMaps g{Image(h, w, 1, 0.0, 360.0), Image(h, w, 1), Image(h, w, 1)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double hh, ss, vv;
            rgb_to_hsv_pixel(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), hh, ss, vv);
            g.hue.at(y, x, 0) = hh;
            g.saturation.at(y, x, 0) = ss;
            g.value.at(y, x, 0) = vv;
        }
    return g;
}

Image hsv_to_rgb(const GuidanceMaps& g) {
    check_same_shape(g.hue, g.saturation, "hsv_to_rgb");
    check_same_shape(g.hue, g.value, "hsv_to_rgb");
    const int h = g.hue.height(), w = g.hue.width();
    Image out(h, w, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r, gg, b;
            hsv_to_rgb_pixel(g.hue.at(y, x, 0), g.saturation.at(y, x, 0), g.value.at(y, x, 0),
                             r, gg, b);
            out.at(y, x, 0) = r;
            out.at(y, x, 1) = gg;
            out.at(y, x, 2) = b;
        }
    return out;
}

namespace {

// sRGB electro-optical transfer (gamma removal)
double srgb_to_linear(double c) {
    return (c <= 0.04045) ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
    constexpr double kDelta = 6.0 / 29.0;
    return (t > kDelta * kDelta * kDelta)
               ? std::cbrt(t)
               : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

}  // namespace

Image rgb_to_lab(const Image& img) {
    if (img.channels() != 3) throw ShapeError("rgb_to_lab: expected 3-channel image");
    // D65 reference white
    constexpr double Xn = 0.95047, Yn = 1.0, Zn = 1.08883;
    const int h = img.height(), w = img.width();
    Image out(h, w, 3, -128.0, 128.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double r = srgb_to_linear(img.at(y, x, 0));
            double g = srgb_to_linear(img.at(y, x, 1));
            double b = srgb_to_linear(img.at(y, x, 2));
            // sRGB -> XYZ (D65)
            double X = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
            double Y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
            double Z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
            double fx = lab_f(X / Xn), fy = lab_f(Y / Yn), fz = lab_f(Z / Zn);
            out.at(y, x, 0) = 116.0 * fy - 16.0;
            out.at(y, x, 1) = 500.0 * (fx - fy);
            out.at(y, x, 2) = 200.0 * (fy - fz);
        }
    return out;
}

Image normalized_hue(const Image& hue_degrees) {
    Image out(hue_degrees.height(), hue_degrees.width(), 1);
    for (std::size_t i = 0; i < out.size(); ++i) out.vec()[i] = hue_degrees.vec()[i] / 360.0;
    return out;
}

}  // namespace rln2::color
