#pragma once

#include <optional>

#include "rln2/layers.hpp"

namespace rln2::nn {

// Scaled dot-product relevance of two equal-length channel slices:
// <a, b> / sqrt(d). This is the similarity behind the CDFFA weights.
double similarity(const std::vector<double>& a, const std::vector<double>& b);

// CBAM-style channel gate: shared two-layer MLP over average- and max-pooled
// channel descriptors, sigmoid gates applied per channel.
struct ChannelAttention {
    ChannelAttention() = default;
    ChannelAttention(ParamStore& ps, const std::string& name, Rng& rng, int channels,
                     int reduction = 4);
    VarPtr operator()(const VarPtr& x) const;
    std::int64_t macs(std::int64_t h, std::int64_t w) const;

    Linear fc1, fc2;
    int channels = 0, hidden = 0;
};

// Cross-Domain Feature Fusion Attention. The main stream, the low-frequency
// stream and the guidance features are projected to n channels by learned
// 1x1 convolutions; per-channel dot-product similarities to the guidance are
// softmax-normalized into relevance weights alpha (main) and beta (low-freq),
// and the two reweighted stacks are summed:
//   x_out = { alpha_i * x_main_i } + { beta_i * x_lf_i }
// Without a low-frequency stream only the alpha term remains.
struct Cdffa {
    Cdffa() = default;
    Cdffa(ParamStore& ps, const std::string& name, Rng& rng, int main_ch, int lf_ch, int guid_ch,
          int n);

    VarPtr operator()(const VarPtr& x_main, const VarPtr& x_lf, const VarPtr& x_guid) const;
    std::int64_t macs(std::int64_t h, std::int64_t w) const;

    // Frozen-weight core: alpha/beta applied to already-projected streams.
    // Kept separate so the channel reweighting can be tested in isolation.
    static VarPtr weighted_sum(const VarPtr& main_proj, const VarPtr& lf_proj,
                               const VarPtr& alpha, const VarPtr& beta);

    Conv2d proj_main, proj_lf, proj_guid;
    int n = 0;
    bool has_lf = false;
};

// Scaled dot-product cross-attention; queries come from the decoder feature
// map, keys/values from wide-context tokens. Output is residual-added to the
// query stream.
struct CrossAttention {
    CrossAttention() = default;
    CrossAttention(ParamStore& ps, const std::string& name, Rng& rng, int query_ch,
                   int context_ch, int heads);

    VarPtr operator()(const VarPtr& x, const VarPtr& context_tokens) const;
    std::int64_t macs(std::int64_t h, std::int64_t w, std::int64_t context_tokens) const;

    Linear q, k, v, out;
    int query_ch = 0, context_ch = 0, heads = 0, head_dim = 0;
};

}  // namespace rln2::nn
