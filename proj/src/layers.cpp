#include "rln2/layers.hpp"

#include <cmath>

namespace rln2::nn {

VarPtr ParamStore::create(const std::string& name, Tensor init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    auto p = param(name, std::move(init));
    index_[name] = params_.size();
    params_.push_back(p);
    return p;
}

VarPtr ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return params_[it->second];
}

std::int64_t ParamStore::total_elements() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->val.numel();
    return n;
}

Tensor uniform_init(Rng& rng, const std::vector<std::int64_t>& shape, std::int64_t fan_in) {
    Tensor t(shape);
    double bound = std::sqrt(1.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, Rng& rng, int cin_, int cout_, int k_,
               int stride_, int pad_, int groups_, bool zero_init)
    : cin(cin_), cout(cout_), k(k_), stride(stride_), pad(pad_), groups(groups_) {
    if (cin % groups != 0 || cout % groups != 0)
        throw ConfigError("conv " + name + ": groups must divide channel counts");
    std::int64_t fan_in = static_cast<std::int64_t>(cin / groups) * k * k;
    Tensor wt({cout, cin / groups, k, k});
    if (!zero_init) wt = uniform_init(rng, wt.shape(), fan_in);
    w = ps.create(name + ".w", std::move(wt));
    b = ps.create(name + ".b", Tensor({cout}));
}

std::int64_t Conv2d::macs(std::int64_t hout, std::int64_t wout) const {
    return static_cast<std::int64_t>(k) * k * (cin / groups) * cout * hout * wout;
}

std::pair<std::int64_t, std::int64_t> Conv2d::out_size(std::int64_t h, std::int64_t wd) const {
    return {(h + 2 * pad - k) / stride + 1, (wd + 2 * pad - k) / stride + 1};
}

Linear::Linear(ParamStore& ps, const std::string& name, Rng& rng, int cin_, int cout_,
               bool zero_init)
    : cin(cin_), cout(cout_) {
    Tensor wt({cin, cout});
    if (!zero_init) wt = uniform_init(rng, wt.shape(), cin);
    w = ps.create(name + ".w", std::move(wt));
    b = ps.create(name + ".b", Tensor({cout}));
}

LayerNormChannels::LayerNormChannels(ParamStore& ps, const std::string& name, int channels) {
    Tensor g({channels});
    g.fill(1.0);
    gamma = ps.create(name + ".gamma", std::move(g));
    beta = ps.create(name + ".beta", Tensor({channels}));
}

GatedConvBlock::GatedConvBlock(ParamStore& ps, const std::string& name, Rng& rng, int channels_,
                               int hidden_)
    : channels(channels_), hidden(hidden_ > 0 ? hidden_ : 2 * channels_) {
    expand = Conv2d(ps, name + ".expand", rng, channels, 2 * hidden, 1);
    project = Conv2d(ps, name + ".project", rng, hidden, channels, 1);
}

VarPtr GatedConvBlock::operator()(const VarPtr& x) const {
    auto e = expand(x);
    auto gate = slice_channels(e, 0, hidden);
    auto value = slice_channels(e, hidden, hidden);
    auto mixed = mul(gelu(gate), value);
    return add(x, project(mixed));
}

std::int64_t GatedConvBlock::macs(std::int64_t h, std::int64_t w) const {
    return expand.macs(h, w) + project.macs(h, w) + static_cast<std::int64_t>(hidden) * h * w;
}

ConvNextBlock::ConvNextBlock(ParamStore& ps, const std::string& name, Rng& rng, int channels_)
    : channels(channels_) {
    dw = Conv2d(ps, name + ".dw", rng, channels, channels, 7, 1, 3, channels);
    ln = LayerNormChannels(ps, name + ".ln", channels);
    pw1 = Conv2d(ps, name + ".pw1", rng, channels, 4 * channels, 1);
    pw2 = Conv2d(ps, name + ".pw2", rng, 4 * channels, channels, 1);
}

VarPtr ConvNextBlock::operator()(const VarPtr& x) const {
    auto y = dw(x);
    y = ln(y);
    y = pw1(y);
    y = gelu(y);
    y = pw2(y);
    return add(x, y);
}

std::int64_t ConvNextBlock::macs(std::int64_t h, std::int64_t w) const {
    return dw.macs(h, w) + pw1.macs(h, w) + pw2.macs(h, w);
}

}  // namespace rln2::nn
