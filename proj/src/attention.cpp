#include "rln2/attention.hpp"

#include <cmath>

namespace rln2::nn {

double similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ShapeError("similarity: slice length mismatch");
    if (a.empty()) throw ShapeError("similarity: empty slices");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return dot / std::sqrt(static_cast<double>(a.size()));
}

ChannelAttention::ChannelAttention(ParamStore& ps, const std::string& name, Rng& rng,
                                   int channels_, int reduction)
    : channels(channels_), hidden(std::max(1, channels_ / reduction)) {
    fc1 = Linear(ps, name + ".fc1", rng, channels, hidden);
    fc2 = Linear(ps, name + ".fc2", rng, hidden, channels);
}

VarPtr ChannelAttention::operator()(const VarPtr& x) const {
    auto mlp = [this](const VarPtr& desc) { return fc2(gelu(fc1(desc))); };
    // {C} descriptors run through the shared MLP as single-token rows {1,C}
    auto avg = reshape(global_avg_pool(x), {1, static_cast<std::int64_t>(channels)});
    auto mx = reshape(global_max_pool(x), {1, static_cast<std::int64_t>(channels)});
    auto gates = sigmoid(add(mlp(avg), mlp(mx)));
    return channel_scale(x, reshape(gates, {static_cast<std::int64_t>(channels)}));
}

std::int64_t ChannelAttention::macs(std::int64_t h, std::int64_t w) const {
    // two pooling passes, two MLP evaluations, per-channel gating
    return 2 * static_cast<std::int64_t>(channels) * h * w + 2 * (fc1.macs(1) + fc2.macs(1)) +
           static_cast<std::int64_t>(channels) * h * w;
}

Cdffa::Cdffa(ParamStore& ps, const std::string& name, Rng& rng, int main_ch, int lf_ch,
             int guid_ch, int n_)
    : n(n_), has_lf(lf_ch > 0) {
    proj_main = Conv2d(ps, name + ".proj_main", rng, main_ch, n, 1);
    if (has_lf) proj_lf = Conv2d(ps, name + ".proj_lf", rng, lf_ch, n, 1);
    proj_guid = Conv2d(ps, name + ".proj_guid", rng, guid_ch, n, 1);
}

VarPtr Cdffa::weighted_sum(const VarPtr& main_proj, const VarPtr& lf_proj, const VarPtr& alpha,
                           const VarPtr& beta) {
    auto out = channel_scale(main_proj, alpha);
    if (lf_proj) {
        if (!beta) throw ShapeError("cdffa: low-frequency stream given without beta weights");
        out = add(out, channel_scale(lf_proj, beta));
    }
    return out;
}

VarPtr Cdffa::operator()(const VarPtr& x_main, const VarPtr& x_lf, const VarPtr& x_guid) const {
    if (static_cast<bool>(x_lf) != has_lf)
        throw ShapeError("cdffa: low-frequency stream presence does not match construction");
    auto xm = proj_main(x_main);
    auto xg = proj_guid(x_guid);
    if (xm->val.dim(1) != xg->val.dim(1) || xm->val.dim(2) != xg->val.dim(2))
        throw ShapeError("cdffa: spatial mismatch after projection");
    const double scale =
        1.0 / std::sqrt(static_cast<double>(xm->val.dim(1) * xm->val.dim(2)));
    auto alpha = softmax_vec(channel_dot(xm, xg, scale));
    VarPtr xl, beta;
    if (has_lf) {
        xl = proj_lf(x_lf);
        if (xl->val.dim(1) != xg->val.dim(1) || xl->val.dim(2) != xg->val.dim(2))
            throw ShapeError("cdffa: spatial mismatch after projection");
        beta = softmax_vec(channel_dot(xl, xg, scale));
    }
    return weighted_sum(xm, xl, alpha, beta);
}

std::int64_t Cdffa::macs(std::int64_t h, std::int64_t w) const {
    std::int64_t total = proj_main.macs(h, w) + proj_guid.macs(h, w);
    std::int64_t nn_ = static_cast<std::int64_t>(n);
    total += nn_ * h * w;  // alpha similarities
    total += nn_ * h * w;  // alpha reweighting
    if (has_lf) {
        total += proj_lf.macs(h, w);
        total += 2 * nn_ * h * w;  // beta similarities + reweighting
    }
    return total;
}

CrossAttention::CrossAttention(ParamStore& ps, const std::string& name, Rng& rng, int query_ch_,
                               int context_ch_, int heads_)
    : query_ch(query_ch_), context_ch(context_ch_), heads(heads_) {
    if (heads < 1 || query_ch % heads != 0)
        throw ConfigError("cross_attention " + name + ": head count must divide embedding width");
    head_dim = query_ch / heads;
    q = Linear(ps, name + ".q", rng, query_ch, query_ch);
    k = Linear(ps, name + ".k", rng, context_ch, query_ch);
    v = Linear(ps, name + ".v", rng, context_ch, query_ch);
    out = Linear(ps, name + ".out", rng, query_ch, query_ch);
}

VarPtr CrossAttention::operator()(const VarPtr& x, const VarPtr& context_tokens) const {
    const int h = static_cast<int>(x->val.dim(1));
    const int w = static_cast<int>(x->val.dim(2));
    auto queries = flatten_hw(x);
    auto Q = q(queries);
    auto K = k(context_tokens);
    auto V = v(context_tokens);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<VarPtr> head_outs;
    head_outs.reserve(static_cast<std::size_t>(heads));
    for (int hh = 0; hh < heads; ++hh) {
        auto Qh = col_slice(Q, hh * head_dim, head_dim);
        auto Kh = col_slice(K, hh * head_dim, head_dim);
        auto Vh = col_slice(V, hh * head_dim, head_dim);
        auto scores = softmax_rows(mul_scalar(matmul_nt(Qh, Kh), scale));
        head_outs.push_back(matmul(scores, Vh));
    }
    auto mixed = heads == 1 ? head_outs[0] : concat_cols(head_outs);
    return add(x, unflatten_hw(out(mixed), h, w));
}

std::int64_t CrossAttention::macs(std::int64_t h, std::int64_t w, std::int64_t context_tokens)
    const {
    const std::int64_t tq = h * w;
    std::int64_t total = q.macs(tq) + k.macs(context_tokens) + v.macs(context_tokens) +
                         out.macs(tq);
    total += tq * context_tokens * query_ch;  // scores
    total += tq * context_tokens * query_ch;  // value mixture
    return total;
}

}  // namespace rln2::nn
