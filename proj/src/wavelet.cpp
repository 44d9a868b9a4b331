#include "rln2/wavelet.hpp"

#include <vector>

namespace rln2::wavelet {

namespace {
std::atomic<std::uint64_t> g_dwt2_calls{0};
}

std::uint64_t dwt2_call_count() { return g_dwt2_calls.load(); }
void reset_dwt2_call_count() { g_dwt2_calls.store(0); }

void haar_fwd_plane(const double* src, int h, int w, int stride,
                    double* ll, double* lh, double* hl, double* hh, int band_stride) {
    g_dwt2_calls.fetch_add(1, std::memory_order_relaxed);
    const int bh = h / 2, bw = w / 2;
    for (int i = 0; i < bh; ++i) {
        const double* r0 = src + static_cast<std::size_t>(2 * i) * stride;
        const double* r1 = r0 + stride;
        double* pll = ll + static_cast<std::size_t>(i) * band_stride;
        double* plh = lh + static_cast<std::size_t>(i) * band_stride;
        double* phl = hl + static_cast<std::size_t>(i) * band_stride;
        double* phh = hh + static_cast<std::size_t>(i) * band_stride;
        for (int j = 0; j < bw; ++j) {
            double a = r0[2 * j], b = r0[2 * j + 1];
            double c = r1[2 * j], d = r1[2 * j + 1];
            pll[j] = 0.5 * (a + b + c + d);
            plh[j] = 0.5 * (a + b - c - d);
            phl[j] = 0.5 * (a - b + c - d);
            phh[j] = 0.5 * (a - b - c + d);
        }
    }
}

void haar_inv_plane(const double* ll, const double* lh, const double* hl, const double* hh,
                    int bh, int bw, int band_stride, double* dst, int h, int w, int stride) {
    (void)h;
    (void)w;
    for (int i = 0; i < bh; ++i) {
        const double* pll = ll + static_cast<std::size_t>(i) * band_stride;
        const double* plh = lh + static_cast<std::size_t>(i) * band_stride;
        const double* phl = hl + static_cast<std::size_t>(i) * band_stride;
        const double* phh = hh + static_cast<std::size_t>(i) * band_stride;
        double* r0 = dst + static_cast<std::size_t>(2 * i) * stride;
        double* r1 = r0 + stride;
        for (int j = 0; j < bw; ++j) {
            double sll = pll[j], slh = plh[j], shl = phl[j], shh = phh[j];
            r0[2 * j] = 0.5 * (sll + slh + shl + shh);
            r0[2 * j + 1] = 0.5 * (sll + slh - shl - shh);
            r1[2 * j] = 0.5 * (sll - slh + shl - shh);
            r1[2 * j + 1] = 0.5 * (sll - slh - shl + shh);
        }
    }
}

namespace {

// Symmetric reflection pad to even height/width (at most one extra row/col,
// mirroring the edge sample so 1-pixel extents stay well defined).
Image pad_to_even(const Image& img) {
    int h = img.height(), w = img.width(), c = img.channels();
    int ph = h + (h % 2), pw = w + (w % 2);
    if (ph == h && pw == w) return img;
    Image out(ph, pw, c, img.range_lo(), img.range_hi());
    for (int y = 0; y < ph; ++y) {
        int sy = (y < h) ? y : 2 * h - 1 - y;
        for (int x = 0; x < pw; ++x) {
            int sx = (x < w) ? x : 2 * w - 1 - x;
            for (int ch = 0; ch < c; ++ch) out.at(y, x, ch) = img.at(sy, sx, ch);
        }
    }
    return out;
}

// Split an interleaved HWC image into per-channel planes.
std::vector<std::vector<double>> planes_of(const Image& img) {
    std::vector<std::vector<double>> planes(img.channels());
    for (int ch = 0; ch < img.channels(); ++ch) {
        planes[ch].resize(static_cast<std::size_t>(img.height()) * img.width());
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x)
                planes[ch][static_cast<std::size_t>(y) * img.width() + x] = img.at(y, x, ch);
    }
    return planes;
}

}  // namespace

SubbandSet dwt2(const Image& img) {
    if (img.height() < 1 || img.width() < 1) throw ShapeError("dwt2: empty image");
    SubbandSet s;
    s.orig_h = img.height();
    s.orig_w = img.width();

    Image padded = pad_to_even(img);
    const int h = padded.height(), w = padded.width(), c = padded.channels();
    const int bh = h / 2, bw = w / 2;
    s.ll = Image(bh, bw, c, 2.0 * img.range_lo(), 2.0 * img.range_hi());
    s.lh = Image(bh, bw, c, -img.range_hi(), img.range_hi());
    s.hl = s.lh;
    s.hh = s.lh;

    auto planes = planes_of(padded);
    std::vector<double> ll(static_cast<std::size_t>(bh) * bw), lh(ll.size()), hl(ll.size()),
        hh(ll.size());
    for (int ch = 0; ch < c; ++ch) {
        haar_fwd_plane(planes[ch].data(), h, w, w, ll.data(), lh.data(), hl.data(), hh.data(), bw);
        for (int i = 0; i < bh; ++i)
            for (int j = 0; j < bw; ++j) {
                std::size_t k = static_cast<std::size_t>(i) * bw + j;
                s.ll.at(i, j, ch) = ll[k];
                s.lh.at(i, j, ch) = lh[k];
                s.hl.at(i, j, ch) = hl[k];
                s.hh.at(i, j, ch) = hh[k];
            }
    }
    return s;
}

Image idwt2(const SubbandSet& s) {
    check_same_shape(s.ll, s.lh, "idwt2");
    check_same_shape(s.ll, s.hl, "idwt2");
    check_same_shape(s.ll, s.hh, "idwt2");
    const int bh = s.ll.height(), bw = s.ll.width(), c = s.ll.channels();
    const int h = 2 * bh, w = 2 * bw;
    int oh = s.orig_h > 0 ? s.orig_h : h;
    int ow = s.orig_w > 0 ? s.orig_w : w;
    if (oh > h || ow > w || oh < h - 1 || ow < w - 1)
        throw ShapeError("idwt2: recorded original size inconsistent with subband shapes");

    std::vector<double> ll(static_cast<std::size_t>(bh) * bw), lh(ll.size()), hl(ll.size()),
        hh(ll.size()), plane(static_cast<std::size_t>(h) * w);
    Image out(oh, ow, c);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < bh; ++i)
            for (int j = 0; j < bw; ++j) {
                std::size_t k = static_cast<std::size_t>(i) * bw + j;
                ll[k] = s.ll.at(i, j, ch);
                lh[k] = s.lh.at(i, j, ch);
                hl[k] = s.hl.at(i, j, ch);
                hh[k] = s.hh.at(i, j, ch);
            }
        haar_inv_plane(ll.data(), lh.data(), hl.data(), hh.data(), bh, bw, bw, plane.data(), h, w,
                       w);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x)
                out.at(y, x, ch) = plane[static_cast<std::size_t>(y) * w + x];
    }
    return out;
}

}  // namespace rln2::wavelet
