#include "rln2/model.hpp"

#include <cmath>
#include <numeric>

#include "rln2/wavelet.hpp"

namespace rln2::model {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::S: return "S";
        case Variant::Sf: return "Sf";
        case Variant::L: return "L";
        case Variant::Lf: return "Lf";
    }
    throw ConfigError("bad variant");
}

std::string to_string(GuidanceMode g) {
    switch (g) {
        case GuidanceMode::none: return "none";
        case GuidanceMode::rgb: return "rgb";
        case GuidanceMode::lab: return "lab";
        case GuidanceMode::hsv: return "hsv";
    }
    throw ConfigError("bad guidance mode");
}

std::string to_string(FusionMode f) {
    return f == FusionMode::concat ? "concat" : "cdffa";
}

std::string to_string(BackboneKind b) {
    switch (b) {
        case BackboneKind::none: return "none";
        case BackboneKind::tiny: return "tiny";
        case BackboneKind::large: return "large";
    }
    throw ConfigError("bad backbone kind");
}

Variant variant_from_string(const std::string& s) {
    if (s == "S") return Variant::S;
    if (s == "Sf") return Variant::Sf;
    if (s == "L") return Variant::L;
    if (s == "Lf") return Variant::Lf;
    throw ConfigError("unknown variant '" + s + "' (expected S, Sf, L or Lf)");
}

GuidanceMode guidance_from_string(const std::string& s) {
    if (s == "none") return GuidanceMode::none;
    if (s == "rgb") return GuidanceMode::rgb;
    if (s == "lab") return GuidanceMode::lab;
    if (s == "hsv") return GuidanceMode::hsv;
    throw ConfigError("unknown guidance mode '" + s + "'");
}

FusionMode fusion_from_string(const std::string& s) {
    if (s == "concat") return FusionMode::concat;
    if (s == "cdffa") return FusionMode::cdffa;
    throw ConfigError("unknown fusion mode '" + s + "'");
}

BackboneKind backbone_from_string(const std::string& s) {
    if (s == "none") return BackboneKind::none;
    if (s == "tiny") return BackboneKind::tiny;
    if (s == "large") return BackboneKind::large;
    throw ConfigError("unknown backbone kind '" + s + "'");
}

void ModelConfig::validate() const {
    if (stages < 1 || stages > 5) throw ConfigError("stages must be in [1, 5]");
    if (base_width < 2) throw ConfigError("base_width must be >= 2");
    if (heads < 1) throw ConfigError("heads must be >= 1");
    if (retinex_eps <= 0.0) throw ConfigError("retinex_eps must be positive");
    const bool large = context_backbone == BackboneKind::large;
    const bool wants_large = variant == Variant::L || variant == Variant::Lf;
    if (wants_large != large)
        throw ConfigError("variant " + to_string(variant) + " requires context_backbone " +
                          (wants_large ? "'large'" : "'tiny' or 'none'"));
    for (int s = 0; s <= stages; ++s) {
        int w = base_width << s;
        if (w % heads != 0)
            throw ConfigError("heads must divide every stage width (width " +
                              std::to_string(w) + ")");
    }
}

ModelConfig ModelConfig::for_variant(Variant v) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.context_backbone =
        (v == Variant::L || v == Variant::Lf) ? BackboneKind::large : BackboneKind::tiny;
    return cfg;
}

KvText ModelConfig::to_kvtext() const {
    KvText kv;
    kv.set("model.variant", to_string(variant));
    kv.set("model.guidance", to_string(guidance));
    kv.set("model.fusion", to_string(fusion));
    kv.set_int("model.stages", stages);
    kv.set_int("model.base_width", base_width);
    kv.set("model.context_backbone", to_string(context_backbone));
    kv.set_int("model.seed", static_cast<std::int64_t>(seed));
    kv.set_double("model.retinex_eps", retinex_eps);
    kv.set_int("model.normalize_guidance", normalize_guidance ? 1 : 0);
    kv.set_int("model.heads", heads);
    return kv;
}

ModelConfig ModelConfig::from_kvtext(const KvText& kv) {
    ModelConfig cfg;
    cfg.variant = variant_from_string(kv.get("model.variant"));
    cfg.guidance = guidance_from_string(kv.get("model.guidance"));
    cfg.fusion = fusion_from_string(kv.get("model.fusion"));
    cfg.stages = static_cast<int>(kv.get_int("model.stages"));
    cfg.base_width = static_cast<int>(kv.get_int("model.base_width"));
    cfg.context_backbone = backbone_from_string(kv.get("model.context_backbone"));
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("model.seed"));
    cfg.retinex_eps = kv.get_double("model.retinex_eps");
    cfg.normalize_guidance = kv.get_int("model.normalize_guidance") != 0;
    cfg.heads = static_cast<int>(kv.get_int("model.heads"));
    cfg.validate();
    return cfg;
}

std::int64_t conv_macs(std::int64_t k, std::int64_t cin, std::int64_t cout, std::int64_t hout,
                       std::int64_t wout, std::int64_t groups) {
    return k * k * (cin / groups) * cout * hout * wout;
}

// ---------------- ContextBackbone ----------------

ContextBackbone::ContextBackbone(nn::ParamStore& ps, const std::string& name, Rng& rng,
                                 BackboneKind kind_)
    : kind(kind_) {
    if (kind == BackboneKind::none) return;
    if (kind == BackboneKind::tiny) {
        widths = {24, 48, 96};
        depths = {1, 1, 1};
    } else {
        widths = {48, 96, 192};
        depths = {2, 2, 2};
    }
    stem = nn::Conv2d(ps, name + ".stem", rng, 3, widths[0], 4, 4, 0);
    stem_norm = nn::LayerNormChannels(ps, name + ".stem_norm", widths[0]);
    blocks.resize(widths.size());
    for (std::size_t i = 0; i < widths.size(); ++i) {
        for (int d = 0; d < depths[i]; ++d)
            blocks[i].push_back(nn::ConvNextBlock(
                ps, name + ".stage" + std::to_string(i) + ".block" + std::to_string(d), rng,
                widths[i]));
        if (i + 1 < widths.size()) {
            down_norms.push_back(
                nn::LayerNormChannels(ps, name + ".down_norm" + std::to_string(i), widths[i]));
            downsamples.push_back(nn::Conv2d(ps, name + ".down" + std::to_string(i), rng,
                                             widths[i], widths[i + 1], 2, 2, 0));
        }
    }
}

ContextBackbone::Features ContextBackbone::operator()(const nn::VarPtr& img) const {
    Features f;
    if (kind == BackboneKind::none) return f;
    auto x = stem(img);
    f.stem_pre_norm = x;
    x = stem_norm(x);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        for (const auto& blk : blocks[i]) x = blk(x);
        f.stage_maps.push_back(x);
        if (i + 1 < widths.size()) {
            x = down_norms[i](x);
            x = downsamples[i](x);
        }
    }
    // Deepest map pooled down to at most ~8 tokens per side.
    auto deep = f.stage_maps.back();
    while (deep->val.dim(1) > 8 && deep->val.dim(2) > 8 && deep->val.dim(1) % 2 == 0 &&
           deep->val.dim(2) % 2 == 0)
        deep = nn::avg_pool2d(deep, 2);
    f.tokens = nn::flatten_hw(deep);
    return f;
}

std::int64_t ContextBackbone::macs(std::int64_t h, std::int64_t w) const {
    if (kind == BackboneKind::none) return 0;
    std::int64_t total = 0;
    std::int64_t sh = h / 4, sw = w / 4;
    total += stem.macs(sh, sw);
    for (std::size_t i = 0; i < widths.size(); ++i) {
        for (const auto& blk : blocks[i]) total += blk.macs(sh, sw);
        if (i + 1 < widths.size()) {
            total += downsamples[i].macs(sh / 2, sw / 2);
            sh /= 2;
            sw /= 2;
        }
    }
    return total;
}

// ---------------- Branch ----------------

Branch::Branch(nn::ParamStore& ps, const std::string& name_, Rng& rng, const ModelConfig& cfg,
               int in_ch_, int guid_ch_, int context_ch_)
    : name(name_),
      in_ch(in_ch_),
      guid_ch(guid_ch_),
      context_ch(context_ch_),
      freq(cfg.frequency_stream()),
      fusion(cfg.fusion),
      guidance_mode(cfg.guidance) {
    const int S = cfg.stages;
    widths.resize(S + 1);
    for (int s = 0; s <= S; ++s) widths[s] = cfg.base_width << s;
    const int n = widths[S];

    stem = nn::Conv2d(ps, name + ".stem", rng, in_ch, widths[0], 3, 1, 1);
    for (int s = 0; s < S; ++s) {
        enc.push_back(nn::Conv2d(ps, name + ".enc" + std::to_string(s), rng, widths[s],
                                 widths[s + 1], 3, 2, 1));
        enc_refine.push_back(
            nn::GatedConvBlock(ps, name + ".enc_refine" + std::to_string(s), rng, widths[s + 1]));
        if (freq)
            lf_proj.push_back(nn::Conv2d(ps, name + ".lf_proj" + std::to_string(s), rng,
                                         widths[s], widths[s + 1], 1));
    }

    if (guidance_mode != GuidanceMode::none) {
        guid_conv1 = nn::Conv2d(ps, name + ".guid_conv1", rng, guid_ch, n, 3, 1, 1);
        guid_conv2 = nn::Conv2d(ps, name + ".guid_conv2", rng, n, n, 1);
        if (fusion == FusionMode::cdffa)
            cdffa = nn::Cdffa(ps, name + ".cdffa", rng, n, freq ? n : 0, n, n);
        else
            fuse_conv = nn::Conv2d(ps, name + ".fuse", rng, n * (freq ? 3 : 2), n, 3, 1, 1);
    } else if (freq) {
        fuse_conv = nn::Conv2d(ps, name + ".fuse", rng, 2 * n, n, 1);
    }
    bottleneck_refine = nn::GatedConvBlock(ps, name + ".bottleneck_refine", rng, n);

    for (int s = S - 1; s >= 0; --s) {
        const std::string d = name + ".dec" + std::to_string(s);
        if (freq)
            hf_fuse.push_back(nn::Conv2d(ps, d + ".hf_fuse", rng, widths[s + 1] + 3 * widths[s],
                                         widths[s + 1], 1));
        if (context_ch > 0)
            cross.push_back(
                nn::CrossAttention(ps, d + ".cross", rng, widths[s + 1], context_ch, cfg.heads));
        chan_attn.push_back(nn::ChannelAttention(ps, d + ".chan_attn", rng, widths[s + 1]));
        dec_refine.push_back(nn::GatedConvBlock(ps, d + ".refine", rng, widths[s + 1]));
        up.push_back(nn::Conv2d(ps, d + ".up", rng, widths[s + 1], widths[s], 3, 1, 1));
        skip_fuse.push_back(nn::Conv2d(ps, d + ".skip_fuse", rng, 2 * widths[s], widths[s], 1));
    }

    const int out_ch = in_ch;  // residual matches the branch component
    head = nn::Conv2d(ps, name + ".head", rng, widths[0], out_ch, 3, 1, 1, 1,
                      /*zero_init=*/true);
}

namespace {

double feature_norm(const nn::VarPtr& v) {
    double s = 0.0;
    for (std::int64_t i = 0; i < v->val.numel(); ++i) s += v->val[i] * v->val[i];
    return std::sqrt(s);
}

}  // namespace

nn::VarPtr Branch::forward(const nn::VarPtr& x, const nn::VarPtr& guidance,
                           const nn::VarPtr& context_tokens,
                           std::vector<std::pair<std::string, double>>* diagnostics) const {
    const int S = static_cast<int>(enc.size());
    auto record = [&](const std::string& tag, const nn::VarPtr& v) {
        if (diagnostics) diagnostics->emplace_back(name + "." + tag, feature_norm(v));
    };

    auto f = nn::gelu(stem(x));
    record("stem", f);

    std::vector<nn::VarPtr> skips;   // features entering each encoder stage
    std::vector<nn::VarPtr> hf_skips;  // high-frequency subbands per stage
    nn::VarPtr lf = freq ? f : nullptr;
    for (int s = 0; s < S; ++s) {
        skips.push_back(f);
        f = enc_refine[s](nn::gelu(enc[s](f)));
        record("enc" + std::to_string(s), f);
        if (freq) {
            const int c = static_cast<int>(lf->val.dim(0));
            auto bands = nn::haar_dwt2(lf);
            auto ll = nn::slice_channels(bands, 0, c);
            hf_skips.push_back(nn::slice_channels(bands, c, 3 * c));
            lf = lf_proj[s](ll);
        }
    }

    // R.block: guided fusion of the dual-domain bottleneck features.
    nn::VarPtr fused;
    if (guidance_mode != GuidanceMode::none) {
        if (!guidance) throw ShapeError("branch " + name + ": missing guidance input");
        auto g = nn::avg_pool2d(guidance, 1 << S);
        g = guid_conv2(nn::gelu(guid_conv1(g)));
        if (fusion == FusionMode::cdffa) {
            fused = cdffa(f, freq ? lf : nullptr, g);
        } else {
            std::vector<nn::VarPtr> cat{f};
            if (freq) cat.push_back(lf);
            cat.push_back(g);
            fused = nn::gelu(fuse_conv(nn::concat_channels(cat)));
        }
    } else {
        fused = freq ? nn::gelu(fuse_conv(nn::concat_channels({f, lf}))) : f;
    }
    f = bottleneck_refine(fused);
    record("bottleneck", f);

    for (int i = 0; i < S; ++i) {
        const int s = S - 1 - i;  // decoder mirrors encoder stage s
        if (freq) f = hf_fuse[i](nn::concat_channels({f, hf_skips[s]}));
        if (!cross.empty()) f = cross[i](f, context_tokens);
        f = chan_attn[i](f);
        f = dec_refine[i](f);
        f = nn::gelu(up[i](nn::nearest_upsample2(f)));
        f = skip_fuse[i](nn::concat_channels({f, skips[s]}));
        record("dec" + std::to_string(s), f);
    }
    return head(f);
}

std::int64_t Branch::macs(std::int64_t h, std::int64_t w, std::int64_t context_tokens) const {
    const int S = static_cast<int>(enc.size());
    std::int64_t total = 0;
    std::int64_t sh = h, sw = w;
    total += stem.macs(sh, sw);
    for (int s = 0; s < S; ++s) {
        total += enc[s].macs(sh / 2, sw / 2) + enc_refine[s].macs(sh / 2, sw / 2);
        if (freq) {
            // Haar analysis: 4 multiply-accumulates per output coefficient.
            total += 4 * static_cast<std::int64_t>(widths[s]) * sh * sw;
            total += lf_proj[s].macs(sh / 2, sw / 2);
        }
        sh /= 2;
        sw /= 2;
    }
    // sh, sw now at bottleneck resolution
    if (guidance_mode != GuidanceMode::none) {
        total += guid_conv1.macs(sh, sw) + guid_conv2.macs(sh, sw);
        if (fusion == FusionMode::cdffa)
            total += cdffa.macs(sh, sw);
        else
            total += fuse_conv.macs(sh, sw);
    } else if (freq) {
        total += fuse_conv.macs(sh, sw);
    }
    total += bottleneck_refine.macs(sh, sw);
    for (int i = 0; i < S; ++i) {
        const int s = S - 1 - i;
        if (freq) total += hf_fuse[i].macs(sh, sw);
        if (!cross.empty()) total += cross[i].macs(sh, sw, context_tokens);
        total += chan_attn[i].macs(sh, sw);
        total += dec_refine[i].macs(sh, sw);
        total += up[i].macs(sh * 2, sw * 2);
        total += skip_fuse[i].macs(sh * 2, sw * 2);
        (void)s;
        sh *= 2;
        sw *= 2;
    }
    total += head.macs(sh, sw);
    return total;
}

// ---------------- Rln2Model ----------------

namespace {

int guidance_channels(GuidanceMode g, bool luminance_branch) {
    switch (g) {
        case GuidanceMode::none: return 0;
        case GuidanceMode::rgb: return 3;
        case GuidanceMode::lab: return luminance_branch ? 1 : 2;
        case GuidanceMode::hsv: return luminance_branch ? 1 : 2;
    }
    throw ConfigError("bad guidance mode");
}

}  // namespace

Rln2Model::Rln2Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    backbone_ = ContextBackbone(params_, "ctx", rng, cfg_.context_backbone);
    if (cfg_.guidance == GuidanceMode::rgb)
        dyn_filter_ = nn::Conv2d(params_, "dyn_filter", rng, 3, 3, 3, 1, 1, 3);
    const int ctx_ch = backbone_.deepest_width();
    branch_l_ = std::make_unique<Branch>(params_, "L", rng, cfg_, 1,
                                         guidance_channels(cfg_.guidance, true), ctx_ch);
    branch_r_ = std::make_unique<Branch>(params_, "R", rng, cfg_, 3,
                                         guidance_channels(cfg_.guidance, false), ctx_ch);
}

int Rln2Model::pad_multiple() const {
    int m = 1 << cfg_.stages;
    if (cfg_.context_backbone != BackboneKind::none) m = std::max(m, 16);
    return m;
}

namespace {

// Symmetric reflection pad on the bottom/right to the given multiple.
Image pad_to_multiple(const Image& img, int multiple) {
    int h = img.height(), w = img.width();
    int ph = ((h + multiple - 1) / multiple) * multiple;
    int pw = ((w + multiple - 1) / multiple) * multiple;
    if (ph == h && pw == w) return img;
    Image out(ph, pw, img.channels());
    auto reflect = [](int i, int n) {
        int t = i % (2 * n);
        return t < n ? t : 2 * n - 1 - t;
    };
    for (int y = 0; y < ph; ++y) {
        int sy = reflect(y, h);
        for (int x = 0; x < pw; ++x) {
            int sx = reflect(x, w);
            for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return out;
}

Image crop(const Image& img, int h, int w) {
    if (img.height() == h && img.width() == w) return img;
    Image out(h, w, img.channels());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(y, x, c);
    return out;
}

}  // namespace

Rln2Model::ForwardGraph Rln2Model::forward_graph(const Image& input) const {
    if (input.channels() != 3) throw ShapeError("forward: expected a 3-channel RGB image");
    if (!input.all_finite()) throw ValueError("forward: input contains non-finite values");

    ForwardGraph out;
    out.orig_h = input.height();
    out.orig_w = input.width();
    Image work = pad_to_multiple(input, pad_multiple());

    auto pair = retinex::decompose(work, cfg_.retinex_eps);
    auto lum_c = nn::constant(pair.luminance.to_chw());
    auto refl_c = nn::constant(pair.reflectance.to_chw());
    auto rgb_c = nn::constant(work.to_chw());

    // Guidance preparation. hsv/lab guidance maps are fixed inputs; rgb
    // guidance runs through the learned dynamical filter, whose output and
    // residual complement form the two streams.
    nn::VarPtr guid_l, guid_r;
    switch (cfg_.guidance) {
        case GuidanceMode::none: break;
        case GuidanceMode::hsv: {
            auto maps = color::rgb_to_hsv(work);
            Image hue = cfg_.normalize_guidance ? color::normalized_hue(maps.hue) : maps.hue;
            guid_l = nn::constant(maps.value.to_chw());
            Tensor hs({2, work.height(), work.width()});
            for (int y = 0; y < work.height(); ++y)
                for (int x = 0; x < work.width(); ++x) {
                    hs.at(0, y, x) = hue.at(y, x, 0);
                    hs.at(1, y, x) = maps.saturation.at(y, x, 0);
                }
            guid_r = nn::constant(std::move(hs));
            break;
        }
        case GuidanceMode::lab: {
            auto lab = color::rgb_to_lab(work);
            Tensor l({1, work.height(), work.width()});
            Tensor ab({2, work.height(), work.width()});
            const bool norm = cfg_.normalize_guidance;
            for (int y = 0; y < work.height(); ++y)
                for (int x = 0; x < work.width(); ++x) {
                    double L = lab.at(y, x, 0), a = lab.at(y, x, 1), b = lab.at(y, x, 2);
                    l.at(0, y, x) = norm ? L / 100.0 : L;
                    ab.at(0, y, x) = norm ? (a + 128.0) / 256.0 : a;
                    ab.at(1, y, x) = norm ? (b + 128.0) / 256.0 : b;
                }
            guid_l = nn::constant(std::move(l));
            guid_r = nn::constant(std::move(ab));
            break;
        }
        case GuidanceMode::rgb: {
            auto filtered = dyn_filter_(rgb_c);
            guid_l = filtered;
            guid_r = nn::sub(rgb_c, filtered);
            break;
        }
    }

    nn::VarPtr tokens;
    if (cfg_.context_backbone != BackboneKind::none) tokens = backbone_(rgb_c).tokens;

    auto d_lum = branch_l_->forward(lum_c, guid_l, tokens, &out.diagnostics);
    auto d_refl = branch_r_->forward(refl_c, guid_r, tokens, &out.diagnostics);

    auto lum_sum = nn::add(lum_c, d_lum);
    auto refl_sum = nn::add(refl_c, d_refl);
    out.unclamped = nn::broadcast_mul_map(refl_sum, lum_sum);
    out.d_lum = d_lum;
    out.d_refl = d_refl;
    return out;
}

Rln2Output Rln2Model::forward(const Image& input) const {
    auto g = forward_graph(input);
    Rln2Output out;
    Image unclamped = Image::from_chw(g.unclamped->val);
    out.restored = crop(unclamped, g.orig_h, g.orig_w);
    for (auto& v : out.restored.vec()) v = clamp01(v);
    out.d_luminance = crop(Image::from_chw(g.d_lum->val), g.orig_h, g.orig_w);
    out.d_reflectance = crop(Image::from_chw(g.d_refl->val), g.orig_h, g.orig_w);
    out.diagnostics = std::move(g.diagnostics);
    return out;
}

ContextBackbone::Features Rln2Model::context_features(const Image& img) const {
    if (cfg_.context_backbone == BackboneKind::none)
        throw ConfigError("context_features: model has no context backbone");
    Image work = pad_to_multiple(img, 16);
    return backbone_(nn::constant(work.to_chw()));
}

std::int64_t Rln2Model::count_macs(int h, int w) const {
    const int m = pad_multiple();
    if (h % m != 0 || w % m != 0)
        throw ConfigError("count_macs: patch size must be divisible by " + std::to_string(m));
    std::int64_t total = 0;
    std::int64_t tokens = 0;
    if (cfg_.context_backbone != BackboneKind::none) {
        total += backbone_.macs(h, w);
        std::int64_t th = h / 16, tw = w / 16;
        while (th > 8 && tw > 8 && th % 2 == 0 && tw % 2 == 0) {
            th /= 2;
            tw /= 2;
        }
        tokens = th * tw;
    }
    if (cfg_.guidance == GuidanceMode::rgb) total += dyn_filter_.macs(h, w);
    total += branch_l_->macs(h, w, tokens);
    total += branch_r_->macs(h, w, tokens);
    // final recomposition multiply
    total += 3LL * h * w;
    return total;
}

void Rln2Model::load_named_tensor(const std::string& name, const Tensor& t) {
    auto p = params_.find(name);
    if (!p->val.same_shape(t))
        throw ConfigError("load_named_tensor: shape mismatch for " + name + " (" +
                          p->val.shape_str() + " vs " + t.shape_str() + ")");
    p->val = t;
}

std::int64_t count_macs(const ModelConfig& cfg, int h, int w) {
    Rln2Model m(cfg);
    return m.count_macs(h, w);
}

Tensor wide_context_features(BackboneKind kind, const Image& img) {
    if (kind == BackboneKind::none)
        throw ConfigError("wide_context_features: backbone kind must be tiny or large");
    nn::ParamStore ps;
    Rng rng(0);
    ContextBackbone bb(ps, "ctx", rng, kind);
    Image work = img;
    if (img.height() % 16 != 0 || img.width() % 16 != 0)
        throw ShapeError("wide_context_features: image extent must be divisible by 16");
    auto feats = bb(nn::constant(work.to_chw()));
    return feats.stage_maps.back()->val;
}

}  // namespace rln2::model
