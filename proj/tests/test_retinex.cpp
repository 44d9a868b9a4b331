#include <cmath>

#include "doctest.h"
#include "rln2/common.hpp"
#include "rln2/retinex.hpp"

using namespace rln2;

namespace {

Image random_rgb(Rng& rng, int h, int w) {
    Image img(h, w, 3);
    for (auto& v : img.vec()) v = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("gray image decomposes into V and unit reflectance") {
    Image img(4, 4, 3);
    img.fill(0.5);
    auto p = retinex::decompose(img);
    for (double v : p.luminance.vec()) CHECK(v == 0.5);
    for (double v : p.reflectance.vec()) CHECK(v == 1.0);
}

TEST_CASE("pure red keeps chroma in the reflectance") {
    Image img(1, 1, 3);
    img.at(0, 0, 0) = 1.0;
    auto p = retinex::decompose(img);
    CHECK(p.luminance.at(0, 0, 0) == 1.0);
    CHECK(p.reflectance.at(0, 0, 0) == 1.0);
    CHECK(p.reflectance.at(0, 0, 1) == 0.0);
    CHECK(p.reflectance.at(0, 0, 2) == 0.0);
}

TEST_CASE("decompose guards") {
    Image gray(2, 2, 1);
    CHECK_THROWS_AS(retinex::decompose(gray), ShapeError);
    Image rgb(2, 2, 3);
    CHECK_THROWS_AS(retinex::decompose(rgb, 0.0), ValueError);
}

TEST_CASE("product identity: zero residual recomposes the input exactly") {
    Rng rng(31);
    Image img = random_rgb(rng, 12, 9);
    auto p = retinex::decompose(img);
    auto out = retinex::recompose(p, retinex::zero_residual(12, 9));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(out.vec()[i] - img.vec()[i]) < 1e-6);
}

TEST_CASE("luminance floor handles all-dark pixels") {
    Image img(1, 1, 3);
    img.at(0, 0, 0) = 1e-7;  // below eps
    auto p = retinex::decompose(img, 1e-4);
    CHECK(p.luminance.at(0, 0, 0) == 1e-4);
    // identity still holds through the floor
    auto out = retinex::recompose(p, retinex::zero_residual(1, 1));
    CHECK(out.at(0, 0, 0) == doctest::Approx(1e-7).epsilon(1e-9));
}

TEST_CASE("forced arithmetic: (0.5 + 0.5) * (1 + 0) = 1") {
    retinex::RetinexPair p{Image(2, 2, 1), Image(2, 2, 3)};
    p.luminance.fill(0.5);
    p.reflectance.fill(1.0);
    auto res = retinex::zero_residual(2, 2);
    res.d_luminance.fill(0.5);
    auto out = retinex::recompose(p, res);
    for (double v : out.vec()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("recompose matches an independent elementwise oracle") {
    Rng rng(37);
    retinex::RetinexPair p{Image(5, 6, 1), Image(5, 6, 3)};
    retinex::ResidualPair r{Image(5, 6, 1), Image(5, 6, 3)};
    for (auto& v : p.luminance.vec()) v = rng.uniform(0.1, 1.0);
    for (auto& v : p.reflectance.vec()) v = rng.uniform(0.0, 1.0);
    for (auto& v : r.d_luminance.vec()) v = rng.uniform(-0.3, 0.3);
    for (auto& v : r.d_reflectance.vec()) v = rng.uniform(-0.3, 0.3);

    auto out = retinex::recompose_unclamped(p, r);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x)
            for (int c = 0; c < 3; ++c) {
                double expect = (p.luminance.at(y, x, 0) + r.d_luminance.at(y, x, 0)) *
                                (p.reflectance.at(y, x, c) + r.d_reflectance.at(y, x, c));
                CHECK(out.at(y, x, c) == doctest::Approx(expect).epsilon(1e-12));
            }
}

TEST_CASE("recompose rejects inconsistent shapes") {
    retinex::RetinexPair p{Image(4, 4, 1), Image(4, 4, 3)};
    retinex::ResidualPair r{Image(4, 3, 1), Image(4, 4, 3)};
    CHECK_THROWS_AS(retinex::recompose(p, r), ShapeError);
}

TEST_CASE("reflectance of achromatic images is one wherever V >= eps") {
    Rng rng(41);
    Image img(6, 6, 3);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
            double v = rng.uniform(0.01, 1.0);
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
    auto p = retinex::decompose(img, 1e-4);
    for (double v : p.reflectance.vec()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("clamping happens only at the very end") {
    retinex::RetinexPair p{Image(1, 1, 1), Image(1, 1, 3)};
    p.luminance.fill(0.8);
    p.reflectance.fill(1.0);
    auto r = retinex::zero_residual(1, 1);
    r.d_luminance.fill(0.5);  // mid-pipeline value 1.3 stays unclamped
    auto raw = retinex::recompose_unclamped(p, r);
    CHECK(raw.at(0, 0, 0) == doctest::Approx(1.3));
    auto clamped = retinex::recompose(p, r);
    CHECK(clamped.at(0, 0, 0) == 1.0);

    r.d_reflectance.fill(-2.0);  // negative product clamps to zero at the end
    auto neg = retinex::recompose_unclamped(p, r);
    CHECK(neg.at(0, 0, 0) == doctest::Approx(1.3 * -1.0));
    CHECK(retinex::recompose(p, r).at(0, 0, 0) == 0.0);
}
