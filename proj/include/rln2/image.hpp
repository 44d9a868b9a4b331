#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rln2/common.hpp"
#include "rln2/tensor.hpp"

namespace rln2 {

// H x W x C image of normalized intensities, interleaved row-major.
// Channel count is 1, 2 or 3; values are expected in [lo, hi] ([0,1] default).
class Image {
public:
    Image() = default;
    Image(int h, int w, int c, double lo = 0.0, double hi = 1.0)
        : h_(h), w_(w), c_(c), lo_(lo), hi_(hi) {
        if (h < 1 || w < 1) throw ShapeError("image dimensions must be >= 1");
        if (c < 1 || c > 3) throw ShapeError("image channel count must be 1, 2 or 3");
        v_.assign(static_cast<std::size_t>(h) * w * c, 0.0);
    }

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    double range_lo() const { return lo_; }
    double range_hi() const { return hi_; }
    void set_range(double lo, double hi) { lo_ = lo; hi_ = hi; }

    double& at(int y, int x, int ch) { return v_[idx(y, x, ch)]; }
    double at(int y, int x, int ch) const { return v_[idx(y, x, ch)]; }

    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }
    std::size_t size() const { return v_.size(); }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    bool same_shape(const Image& o) const { return h_ == o.h_ && w_ == o.w_ && c_ == o.c_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    // HWC image -> CHW tensor (the feature-map layout of the network side).
    Tensor to_chw() const {
        Tensor t({c_, h_, w_});
        for (int ch = 0; ch < c_; ++ch)
            for (int y = 0; y < h_; ++y)
                for (int x = 0; x < w_; ++x) t.at(ch, y, x) = at(y, x, ch);
        return t;
    }

    static Image from_chw(const Tensor& t, double lo = 0.0, double hi = 1.0) {
        if (t.rank() != 3) throw ShapeError("from_chw expects a rank-3 tensor");
        Image img(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)),
                  static_cast<int>(t.dim(0)), lo, hi);
        for (int ch = 0; ch < img.c_; ++ch)
            for (int y = 0; y < img.h_; ++y)
                for (int x = 0; x < img.w_; ++x) img.at(y, x, ch) = t.at(ch, y, x);
        return img;
    }

private:
    std::size_t idx(int y, int x, int ch) const {
        return (static_cast<std::size_t>(y) * w_ + x) * c_ + ch;
    }

    int h_ = 0, w_ = 0, c_ = 0;
    double lo_ = 0.0, hi_ = 1.0;
    std::vector<double> v_;
};

inline void check_same_shape(const Image& a, const Image& b, const char* op) {
    if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": image shape mismatch");
}

}  // namespace rln2
