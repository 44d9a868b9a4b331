#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rln2/autograd.hpp"
#include "rln2/common.hpp"

namespace rln2::nn {

// Ordered parameter registry. Construction order fixes the initialization
// RNG sequence, optimizer slot order and checkpoint layout.
class ParamStore {
public:
    VarPtr create(const std::string& name, Tensor init);
    const std::vector<VarPtr>& all() const { return params_; }
    VarPtr find(const std::string& name) const;
    std::int64_t total_elements() const;

private:
    std::vector<VarPtr> params_;
    std::map<std::string, std::size_t> index_;
};

Tensor uniform_init(Rng& rng, const std::vector<std::int64_t>& shape, std::int64_t fan_in);

struct Conv2d {
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, Rng& rng, int cin, int cout, int k,
           int stride = 1, int pad = 0, int groups = 1, bool zero_init = false);

    VarPtr operator()(const VarPtr& x) const { return conv2d(x, w, b, stride, pad, groups); }
    std::int64_t macs(std::int64_t hout, std::int64_t wout) const;
    std::pair<std::int64_t, std::int64_t> out_size(std::int64_t h, std::int64_t wd) const;

    VarPtr w, b;
    int cin = 0, cout = 0, k = 0, stride = 1, pad = 0, groups = 1;
};

// Token-space affine map: {T,Cin} -> {T,Cout}.
struct Linear {
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, Rng& rng, int cin, int cout,
           bool zero_init = false);

    VarPtr operator()(const VarPtr& t) const { return bias_add_rows(matmul(t, w), b); }
    std::int64_t macs(std::int64_t tokens) const {
        return tokens * static_cast<std::int64_t>(cin) * cout;
    }

    VarPtr w, b;
    int cin = 0, cout = 0;
};

struct LayerNormChannels {
    LayerNormChannels() = default;
    LayerNormChannels(ParamStore& ps, const std::string& name, int channels);
    VarPtr operator()(const VarPtr& x) const { return layer_norm_channels(x, gamma, beta); }
    VarPtr gamma, beta;
};

// Pointwise expand -> gate (*) value -> pointwise project, with residual.
struct GatedConvBlock {
    GatedConvBlock() = default;
    GatedConvBlock(ParamStore& ps, const std::string& name, Rng& rng, int channels,
                   int hidden = 0);
    VarPtr operator()(const VarPtr& x) const;
    std::int64_t macs(std::int64_t h, std::int64_t w) const;

    Conv2d expand, project;
    int channels = 0, hidden = 0;
};

// ConvNeXt-style block: depthwise 7x7, channel layernorm, pointwise expand,
// GELU, pointwise project, residual.
struct ConvNextBlock {
    ConvNextBlock() = default;
    ConvNextBlock(ParamStore& ps, const std::string& name, Rng& rng, int channels);
    VarPtr operator()(const VarPtr& x) const;
    std::int64_t macs(std::int64_t h, std::int64_t w) const;

    Conv2d dw, pw1, pw2;
    LayerNormChannels ln;
    int channels = 0;
};

}  // namespace rln2::nn
