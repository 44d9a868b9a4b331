#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rln2/attention.hpp"
#include "rln2/colorspace.hpp"
#include "rln2/image.hpp"
#include "rln2/kvtext.hpp"
#include "rln2/retinex.hpp"

namespace rln2::model {

enum class Variant { S, Sf, L, Lf };
enum class GuidanceMode { none, rgb, lab, hsv };
enum class FusionMode { concat, cdffa };
enum class BackboneKind { none, tiny, large };

std::string to_string(Variant v);
std::string to_string(GuidanceMode g);
std::string to_string(FusionMode f);
std::string to_string(BackboneKind b);
Variant variant_from_string(const std::string& s);
GuidanceMode guidance_from_string(const std::string& s);
FusionMode fusion_from_string(const std::string& s);
BackboneKind backbone_from_string(const std::string& s);

struct ModelConfig {
    Variant variant = Variant::Sf;
    GuidanceMode guidance = GuidanceMode::hsv;
    FusionMode fusion = FusionMode::cdffa;
    int stages = 3;
    int base_width = 16;
    BackboneKind context_backbone = BackboneKind::tiny;
    std::uint64_t seed = 0;
    double retinex_eps = retinex::kDefaultEps;
    bool normalize_guidance = true;  // guidance channels rescaled to [0,1]
    int heads = 2;

    bool frequency_stream() const { return variant == Variant::Sf || variant == Variant::Lf; }
    void validate() const;  // throws ConfigError

    static ModelConfig for_variant(Variant v);  // fills the matching backbone
    KvText to_kvtext() const;
    static ModelConfig from_kvtext(const KvText& kv);
};

struct Rln2Output {
    Image restored;                  // H x W x 3, clamped to [0,1]
    Image d_luminance;               // H x W x 1
    Image d_reflectance;             // H x W x 3
    std::vector<std::pair<std::string, double>> diagnostics;  // per-stage feature norms
};

// ConvNeXt-style hierarchical feature extractor providing wide context.
// Trained from scratch at this scale; externally computed weights can be
// loaded through the model's named-parameter hook.
struct ContextBackbone {
    ContextBackbone() = default;
    ContextBackbone(nn::ParamStore& ps, const std::string& name, Rng& rng, BackboneKind kind);

    struct Features {
        nn::VarPtr stem_pre_norm;            // 1/4 resolution, before layernorm
        std::vector<nn::VarPtr> stage_maps;  // 1/4, 1/8, 1/16
        nn::VarPtr tokens;                   // {T, C_deepest}
    };
    Features operator()(const nn::VarPtr& img) const;
    std::int64_t macs(std::int64_t h, std::int64_t w) const;
    int deepest_width() const { return widths.empty() ? 0 : widths.back(); }

    BackboneKind kind = BackboneKind::none;
    nn::Conv2d stem;
    nn::LayerNormChannels stem_norm;
    std::vector<int> widths;
    std::vector<int> depths;
    std::vector<std::vector<nn::ConvNextBlock>> blocks;
    std::vector<nn::Conv2d> downsamples;
    std::vector<nn::LayerNormChannels> down_norms;
};

// One branch of the dual-branch network (luminance or reflectance path).
struct Branch {
    Branch() = default;
    Branch(nn::ParamStore& ps, const std::string& name, Rng& rng, const ModelConfig& cfg,
           int in_ch, int guid_ch, int context_ch);

    nn::VarPtr forward(const nn::VarPtr& x, const nn::VarPtr& guidance,
                       const nn::VarPtr& context_tokens,
                       std::vector<std::pair<std::string, double>>* diagnostics) const;
    std::int64_t macs(std::int64_t h, std::int64_t w, std::int64_t context_tokens) const;

    std::string name;
    int in_ch = 0, guid_ch = 0, context_ch = 0;
    bool freq = false;
    FusionMode fusion = FusionMode::cdffa;
    GuidanceMode guidance_mode = GuidanceMode::hsv;
    std::vector<int> widths;  // stages+1 entries

    nn::Conv2d stem;
    std::vector<nn::Conv2d> enc;
    std::vector<nn::GatedConvBlock> enc_refine;
    std::vector<nn::Conv2d> lf_proj;       // freq only
    nn::Conv2d guid_conv1, guid_conv2;     // guidance embed (none-mode: absent)
    nn::Cdffa cdffa;                       // fusion == cdffa
    nn::Conv2d fuse_conv;                  // fusion == concat or none-mode lf merge
    nn::GatedConvBlock bottleneck_refine;
    std::vector<nn::Conv2d> hf_fuse;       // freq only
    std::vector<nn::CrossAttention> cross; // backbone != none
    std::vector<nn::ChannelAttention> chan_attn;
    std::vector<nn::GatedConvBlock> dec_refine;
    std::vector<nn::Conv2d> up;
    std::vector<nn::Conv2d> skip_fuse;
    nn::Conv2d head;  // zero-initialized residual head
};

class Rln2Model {
public:
    explicit Rln2Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    std::int64_t param_count() const { return params_.total_elements(); }

    struct ForwardGraph {
        nn::VarPtr unclamped;  // {3, Hp, Wp} at padded size
        nn::VarPtr d_lum;      // {1, Hp, Wp}
        nn::VarPtr d_refl;     // {3, Hp, Wp}
        int orig_h = 0, orig_w = 0;
        std::vector<std::pair<std::string, double>> diagnostics;
    };
    ForwardGraph forward_graph(const Image& input) const;
    Rln2Output forward(const Image& input) const;

    std::int64_t count_macs(int h, int w) const;

    // Spatial multiple the input is reflection-padded to.
    int pad_multiple() const;

    // Wide-context features of an image through the shared backbone.
    ContextBackbone::Features context_features(const Image& img) const;

    // Named-tensor loading hook (also used for externally supplied
    // backbone weights). Throws ConfigError on unknown name or shape clash.
    void load_named_tensor(const std::string& name, const Tensor& t);

private:
    ModelConfig cfg_;
    nn::ParamStore params_;
    ContextBackbone backbone_;
    nn::Conv2d dyn_filter_;  // guidance == rgb: learned depthwise split filter
    std::unique_ptr<Branch> branch_l_, branch_r_;
};

std::int64_t count_macs(const ModelConfig& cfg, int h, int w);
std::int64_t conv_macs(std::int64_t k, std::int64_t cin, std::int64_t cout, std::int64_t hout,
                       std::int64_t wout, std::int64_t groups = 1);

// Builds a standalone backbone (seed 0) and returns the deepest feature map
// as {C, H/16, W/16}; full hierarchy available through Rln2Model.
Tensor wide_context_features(BackboneKind kind, const Image& img);

}  // namespace rln2::model
