#pragma once

#include <atomic>
#include <cstdint>

#include "rln2/image.hpp"

namespace rln2::wavelet {

// Single-level orthonormal Haar subbands of an H x W x C image.
// Each band is (H/2) x (W/2) x C (after pad-to-even). orig_h/orig_w record
// the unpadded input size so idwt2 can return exactly the original extent.
struct SubbandSet {
    Image ll, lh, hl, hh;
    int orig_h = 0;
    int orig_w = 0;
};

// Orthonormal 2x2 Haar analysis of one even-sized plane (row-major, stride w).
// For the quad a=x[2i,2j], b=x[2i,2j+1], c=x[2i+1,2j], d=x[2i+1,2j+1]:
//   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2
//   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
void haar_fwd_plane(const double* src, int h, int w, int stride,
                    double* ll, double* lh, double* hl, double* hh, int band_stride);

// Exact synthesis inverse of haar_fwd_plane.
void haar_inv_plane(const double* ll, const double* lh, const double* hl, const double* hh,
                    int bh, int bw, int band_stride, double* dst, int h, int w, int stride);

SubbandSet dwt2(const Image& img);
Image idwt2(const SubbandSet& s);

// Instrumentation: number of per-plane forward Haar transforms executed.
std::uint64_t dwt2_call_count();
void reset_dwt2_call_count();

}  // namespace rln2::wavelet
