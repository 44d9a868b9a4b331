#include <cmath>
#include <vector>

#include "doctest.h"
#include "rln2/common.hpp"
#include "rln2/wavelet.hpp"

using namespace rln2;

namespace {

// Matrix-form oracle: the orthonormal 1D Haar analysis matrix applied to
// rows and columns explicitly, independent of the lifting-style kernel in
// the implementation.
std::vector<std::vector<double>> haar_matrix(int n) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (int k = 0; k < n / 2; ++k) {
        m[k][2 * k] = inv_sqrt2;
        m[k][2 * k + 1] = inv_sqrt2;
        m[n / 2 + k][2 * k] = inv_sqrt2;
        m[n / 2 + k][2 * k + 1] = -inv_sqrt2;
    }
    return m;
}

// Full 2D transform via H * X * H^T; returns the n x n coefficient array
// with quadrant layout [LL LH-ish...]: rows 0..n/2 are row-averages.
std::vector<std::vector<double>> oracle_dwt2(const std::vector<std::vector<double>>& x) {
    int n = static_cast<int>(x.size());
    auto h = haar_matrix(n);
    std::vector<std::vector<double>> t(n, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> y(n, std::vector<double>(n, 0.0));
    // t = x * h^T  (transform rows)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) t[i][j] += x[i][k] * h[j][k];
    // y = h * t    (transform columns)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) y[i][j] += h[i][k] * t[k][j];
    return y;
}

double energy(const Image& img) {
    double e = 0.0;
    for (double v : img.vec()) e += v * v;
    return e;
}

Image random_image(Rng& rng, int h, int w, int c) {
    Image img(h, w, c);
    for (auto& v : img.vec()) v = rng.uniform(-1.0, 1.0);
    return img;
}

}  // namespace

TEST_CASE("constant image: ll = 2c, details vanish") {
    Image img(4, 4, 1);
    img.fill(0.5);
    auto s = wavelet::dwt2(img);
    for (double v : s.ll.vec()) CHECK(v == doctest::Approx(1.0));
    for (double v : s.lh.vec()) CHECK(v == 0.0);
    for (double v : s.hl.vec()) CHECK(v == 0.0);
    for (double v : s.hh.vec()) CHECK(v == 0.0);
}

TEST_CASE("2x2 block: ll is the half-sum") {
    Image img(2, 2, 1);
    img.at(0, 0, 0) = 0.9;   // a
    img.at(0, 1, 0) = 0.1;   // b
    img.at(1, 0, 0) = 0.4;   // c
    img.at(1, 1, 0) = 0.25;  // d
    auto s = wavelet::dwt2(img);
    CHECK(s.ll.at(0, 0, 0) == doctest::Approx((0.9 + 0.1 + 0.4 + 0.25) / 2.0));
}

TEST_CASE("empty image is rejected") {
    CHECK_THROWS_AS(Image(0, 4, 1), ShapeError);
}

TEST_CASE("dwt2 agrees with the explicit matrix oracle on 8x8") {
    Rng rng(11);
    Image img = random_image(rng, 8, 8, 1);
    std::vector<std::vector<double>> x(8, std::vector<double>(8));
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) x[i][j] = img.at(i, j, 0);
    auto coeffs = oracle_dwt2(x);

    auto s = wavelet::dwt2(img);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(s.ll.at(i, j, 0) == doctest::Approx(coeffs[i][j]).epsilon(1e-12));
            CHECK(s.hl.at(i, j, 0) == doctest::Approx(coeffs[i][j + 4]).epsilon(1e-12));
            CHECK(s.lh.at(i, j, 0) == doctest::Approx(coeffs[i + 4][j]).epsilon(1e-12));
            CHECK(s.hh.at(i, j, 0) == doctest::Approx(coeffs[i + 4][j + 4]).epsilon(1e-12));
        }
}

TEST_CASE("perfect reconstruction within 1e-6 on random images") {
    Rng rng(3);
    for (auto [h, w, c] : {std::tuple{8, 8, 3}, {16, 10, 1}, {32, 32, 3}}) {
        Image img = random_image(rng, h, w, c);
        Image back = wavelet::idwt2(wavelet::dwt2(img));
        REQUIRE(back.same_shape(img));
        for (std::size_t i = 0; i < img.size(); ++i)
            CHECK(std::abs(back.vec()[i] - img.vec()[i]) < 1e-6);
    }
}

TEST_CASE("dwt2 of idwt2 reproduces random subbands") {
    Rng rng(5);
    wavelet::SubbandSet s;
    s.ll = random_image(rng, 4, 4, 2);
    s.lh = random_image(rng, 4, 4, 2);
    s.hl = random_image(rng, 4, 4, 2);
    s.hh = random_image(rng, 4, 4, 2);
    s.orig_h = 8;
    s.orig_w = 8;
    auto s2 = wavelet::dwt2(wavelet::idwt2(s));
    for (std::size_t i = 0; i < s.ll.size(); ++i) {
        CHECK(std::abs(s2.ll.vec()[i] - s.ll.vec()[i]) < 1e-6);
        CHECK(std::abs(s2.lh.vec()[i] - s.lh.vec()[i]) < 1e-6);
        CHECK(std::abs(s2.hl.vec()[i] - s.hl.vec()[i]) < 1e-6);
        CHECK(std::abs(s2.hh.vec()[i] - s.hh.vec()[i]) < 1e-6);
    }
}

TEST_CASE("idwt2 trivial cases") {
    wavelet::SubbandSet s;
    s.ll = Image(3, 3, 1);
    s.lh = Image(3, 3, 1);
    s.hl = Image(3, 3, 1);
    s.hh = Image(3, 3, 1);
    s.orig_h = 6;
    s.orig_w = 6;
    SUBCASE("all-zero subbands give the zero image") {
        Image out = wavelet::idwt2(s);
        for (double v : out.vec()) CHECK(v == 0.0);
    }
    SUBCASE("ll = 2c alone gives the constant image c") {
        s.ll.fill(0.7);
        Image out = wavelet::idwt2(s);
        for (double v : out.vec()) CHECK(v == doctest::Approx(0.35));
    }
}

TEST_CASE("idwt2 rejects mismatched subband shapes") {
    wavelet::SubbandSet s;
    s.ll = Image(4, 4, 1);
    s.lh = Image(4, 4, 1);
    s.hl = Image(4, 3, 1);
    s.hh = Image(4, 4, 1);
    CHECK_THROWS_AS(wavelet::idwt2(s), ShapeError);
}

TEST_CASE("Parseval energy equality on even sizes") {
    Rng rng(17);
    Image img = random_image(rng, 16, 16, 3);
    auto s = wavelet::dwt2(img);
    double e = energy(s.ll) + energy(s.lh) + energy(s.hl) + energy(s.hh);
    CHECK(std::abs(e - energy(img)) < 1e-5);
}

TEST_CASE("linearity of the transform") {
    Rng rng(23);
    Image x = random_image(rng, 8, 8, 1);
    Image y = random_image(rng, 8, 8, 1);
    const double a = 1.7, b = -0.4;
    Image z(8, 8, 1);
    for (std::size_t i = 0; i < z.size(); ++i) z.vec()[i] = a * x.vec()[i] + b * y.vec()[i];
    auto sx = wavelet::dwt2(x), sy = wavelet::dwt2(y), sz = wavelet::dwt2(z);
    for (std::size_t i = 0; i < sz.ll.size(); ++i) {
        CHECK(std::abs(sz.ll.vec()[i] - (a * sx.ll.vec()[i] + b * sy.ll.vec()[i])) < 1e-6);
        CHECK(std::abs(sz.hh.vec()[i] - (a * sx.hh.vec()[i] + b * sy.hh.vec()[i])) < 1e-6);
    }
}

TEST_CASE("odd extents are reflection-padded and unpadded on inverse") {
    Rng rng(29);
    Image img = random_image(rng, 7, 5, 3);
    auto s = wavelet::dwt2(img);
    CHECK(s.ll.height() == 4);
    CHECK(s.ll.width() == 3);
    CHECK(s.orig_h == 7);
    CHECK(s.orig_w == 5);
    Image back = wavelet::idwt2(s);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.vec()[i] - img.vec()[i]) < 1e-6);
}

TEST_CASE("dwt2 call counter instruments plane transforms") {
    wavelet::reset_dwt2_call_count();
    Image img(4, 4, 3);
    wavelet::dwt2(img);
    CHECK(wavelet::dwt2_call_count() == 3);  // one per channel
    wavelet::reset_dwt2_call_count();
    CHECK(wavelet::dwt2_call_count() == 0);
}
