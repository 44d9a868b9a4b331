#include <cmath>

#include "doctest.h"
#include "rln2/colorspace.hpp"
#include "rln2/common.hpp"

using namespace rln2;

namespace {

// Independent hexcone oracle, written directly from the textbook piecewise
// definition (sector arithmetic instead of the max-branch form used by the
// implementation).
void oracle_rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    double mx = std::fmax(r, std::fmax(g, b));
    double mn = std::fmin(r, std::fmin(g, b));
    double c = mx - mn;
    v = mx;
    s = mx > 0 ? c / mx : 0.0;
    if (c == 0) {
        h = 0.0;
        return;
    }
    double hp;
    if (mx == r)
        hp = std::fmod((g - b) / c, 6.0);
    else if (mx == g)
        hp = (b - r) / c + 2.0;
    else
        hp = (r - g) / c + 4.0;
    h = 60.0 * hp;
    if (h < 0) h += 360.0;
}

Image random_rgb(Rng& rng, int h, int w) {
    Image img(h, w, 3);
    for (auto& v : img.vec()) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("rgb_to_hsv primary and achromatic pixels") {
    Image img(1, 2, 3);
    img.at(0, 0, 0) = 1.0;  // pure red
    img.at(0, 1, 0) = img.at(0, 1, 1) = img.at(0, 1, 2) = 0.5;  // gray

    auto g = color::rgb_to_hsv(img);
    CHECK(g.hue.at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(g.saturation.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(g.value.at(0, 0, 0) == doctest::Approx(1.0));

    CHECK(g.hue.at(0, 1, 0) == 0.0);  // tie-break to canonical hue
    CHECK(g.saturation.at(0, 1, 0) == 0.0);
    CHECK(g.value.at(0, 1, 0) == doctest::Approx(0.5));
}

TEST_CASE("rgb_to_hsv rejects non-3-channel input") {
    Image gray(4, 4, 1);
    CHECK_THROWS_AS(color::rgb_to_hsv(gray), ShapeError);
}

TEST_CASE("hsv_to_rgb trivial cases") {
    double r, g, b;
    color::hsv_to_rgb_pixel(0.0, 1.0, 1.0, r, g, b);
    CHECK(r == doctest::Approx(1.0));
    CHECK(g == doctest::Approx(0.0));
    CHECK(b == doctest::Approx(0.0));

    color::hsv_to_rgb_pixel(120.0, 1.0, 1.0, r, g, b);
    CHECK(r == doctest::Approx(0.0));
    CHECK(g == doctest::Approx(1.0));
    CHECK(b == doctest::Approx(0.0));

    // hue irrelevant when desaturated
    color::hsv_to_rgb_pixel(217.3, 0.0, 0.375, r, g, b);
    CHECK(r == 0.375);
    CHECK(g == 0.375);
    CHECK(b == 0.375);

    CHECK_THROWS_AS(color::hsv_to_rgb_pixel(360.0, 1.0, 1.0, r, g, b), ValueError);
    CHECK_THROWS_AS(color::hsv_to_rgb_pixel(-1.0, 1.0, 1.0, r, g, b), ValueError);
}

TEST_CASE("rgb->hsv matches the hexcone oracle and round-trips") {
    Rng rng(42);
    Image img = random_rgb(rng, 8, 8);  // 64 random pixels
    auto g = color::rgb_to_hsv(img);

    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double h, s, v;
            oracle_rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
            CHECK(g.hue.at(y, x, 0) == doctest::Approx(h).epsilon(1e-12));
            CHECK(g.saturation.at(y, x, 0) == doctest::Approx(s).epsilon(1e-12));
            CHECK(g.value.at(y, x, 0) == doctest::Approx(v).epsilon(1e-12));
        }

    Image back = color::hsv_to_rgb(g);
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.vec()[i] - img.vec()[i]) < 1e-6);
}

TEST_CASE("value channel equals the per-pixel channel maximum exactly") {
    Rng rng(7);
    Image img = random_rgb(rng, 16, 16);
    auto g = color::rgb_to_hsv(img);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            double mx = std::fmax(img.at(y, x, 0), std::fmax(img.at(y, x, 1), img.at(y, x, 2)));
            CHECK(g.value.at(y, x, 0) == mx);
        }
}

TEST_CASE("achromatic inputs always give zero saturation") {
    for (double v : {0.0, 0.25, 0.5, 0.99, 1.0}) {
        Image img(1, 1, 3);
        img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = v;
        auto g = color::rgb_to_hsv(img);
        CHECK(g.saturation.at(0, 0, 0) == 0.0);
        CHECK(g.hue.at(0, 0, 0) == 0.0);
    }
}

TEST_CASE("rgb_to_lab anchor colors") {
    Image img(1, 3, 3);
    img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = 1.0;  // white
    // pixel (0,1) stays black
    img.at(0, 2, 0) = img.at(0, 2, 1) = img.at(0, 2, 2) = 0.5;  // neutral gray

    auto lab = color::rgb_to_lab(img);
    CHECK(lab.at(0, 0, 0) == doctest::Approx(100.0).epsilon(5e-3));
    CHECK(std::abs(lab.at(0, 0, 1)) < 0.5);
    CHECK(std::abs(lab.at(0, 0, 2)) < 0.5);

    CHECK(lab.at(0, 1, 0) == doctest::Approx(0.0));
    CHECK(lab.at(0, 1, 1) == doctest::Approx(0.0));
    CHECK(lab.at(0, 1, 2) == doctest::Approx(0.0));

    CHECK(std::abs(lab.at(0, 2, 1)) < 0.5);
    CHECK(std::abs(lab.at(0, 2, 2)) < 0.5);
}

TEST_CASE("neutral grays stay achromatic in lab") {
    Image img(1, 1, 3);
    for (double v : {0.05, 0.2, 0.437, 0.8, 0.97}) {
        img.at(0, 0, 0) = img.at(0, 0, 1) = img.at(0, 0, 2) = v;
        auto lab = color::rgb_to_lab(img);
        CHECK(std::abs(lab.at(0, 0, 1)) < 0.5);
        CHECK(std::abs(lab.at(0, 0, 2)) < 0.5);
    }
}

TEST_CASE("normalized hue maps degrees onto [0,1)") {
    Image hue(1, 2, 1, 0.0, 360.0);
    hue.at(0, 0, 0) = 0.0;
    hue.at(0, 1, 0) = 270.0;
    auto n = color::normalized_hue(hue);
    CHECK(n.at(0, 0, 0) == 0.0);
    CHECK(n.at(0, 1, 0) == doctest::Approx(0.75));
}
