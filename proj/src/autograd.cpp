#include "rln2/autograd.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

#include "rln2/wavelet.hpp"

namespace rln2::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    CMapM A(a, m, k), B(b, k, n);
    MapM C(c, m, n);
    if (accumulate)
        C.noalias() += A * B;
    else
        C.noalias() = A * B;
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    CMapM A(a, m, k), B(b, n, k);
    MapM C(c, m, n);
    if (accumulate)
        C.noalias() += A * B.transpose();
    else
        C.noalias() = A * B.transpose();
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate) {
    CMapM A(a, k, m), B(b, k, n);
    MapM C(c, m, n);
    if (accumulate)
        C.noalias() += A.transpose() * B;
    else
        C.noalias() = A.transpose() * B;
}

VarPtr constant(Tensor v) {
    auto out = std::make_shared<Var>();
    out->val = std::move(v);
    return out;
}

VarPtr leaf(Tensor v) {
    auto out = std::make_shared<Var>();
    out->val = std::move(v);
    out->requires_grad = true;
    return out;
}

VarPtr param(const std::string& name, Tensor v) {
    auto out = leaf(std::move(v));
    out->name = name;
    return out;
}

namespace {

VarPtr make_op(Tensor val, std::vector<VarPtr> parents, std::function<void(Var&)> backfn) {
    auto out = std::make_shared<Var>();
    out->val = std::move(val);
    for (const auto& p : parents) out->requires_grad = out->requires_grad || p->requires_grad;
    if (out->requires_grad) {
        out->parents = std::move(parents);
        out->backfn = std::move(backfn);
    }
    return out;
}

}  // namespace

void backward(const VarPtr& root) {
    if (root->val.numel() != 1) throw ShapeError("backward: root must be a scalar");
    if (!root->requires_grad) return;

    // Reverse post-order DFS gives a topological order (consumers first).
    std::vector<Var*> order;
    std::unordered_set<Var*> visited;
    struct Frame {
        Var* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Var* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Var* node = *it;
        if (node->backfn && !node->grad.empty()) node->backfn(*node);
    }
}

// ---------------- elementwise ----------------

VarPtr add(const VarPtr& a, const VarPtr& b) {
    check_same_shape(a->val, b->val, "add");
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + b->val[i];
    return make_op(std::move(out), {a, b}, [](Var& self) {
        for (int k = 0; k < 2; ++k) {
            auto& p = self.parents[k];
            if (!p->requires_grad) continue;
            auto& g = p->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
    });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
    check_same_shape(a->val, b->val, "sub");
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] - b->val[i];
    return make_op(std::move(out), {a, b}, [](Var& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] -= self.grad[i];
        }
    });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
    check_same_shape(a->val, b->val, "mul");
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * b->val[i];
    return make_op(std::move(out), {a, b}, [](Var& self) {
        const Tensor& av = self.parents[0]->val;
        const Tensor& bv = self.parents[1]->val;
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * bv[i];
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * av[i];
        }
    });
}

VarPtr add_scalar(const VarPtr& a, double s) {
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + s;
    return make_op(std::move(out), {a}, [](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

VarPtr mul_scalar(const VarPtr& a, double s) {
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * s;
    return make_op(std::move(out), {a}, [s](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i] * s;
    });
}

VarPtr abs_(const VarPtr& a) {
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(a->val[i]);
    return make_op(std::move(out), {a}, [](Var& self) {
        const Tensor& av = self.parents[0]->val;
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g[i] += self.grad[i] * (av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0));
    });
}

VarPtr relu(const VarPtr& a) {
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] > 0.0 ? a->val[i] : 0.0;
    return make_op(std::move(out), {a}, [](Var& self) {
        const Tensor& av = self.parents[0]->val;
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (av[i] > 0.0) g[i] += self.grad[i];
    });
}

VarPtr gelu(const VarPtr& a) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) {
        double x = a->val[i];
        out[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    return make_op(std::move(out), {a}, [](Var& self) {
        const Tensor& av = self.parents[0]->val;
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            double x = av[i];
            double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            g[i] += self.grad[i] * (cdf + x * pdf);
        }
    });
}

VarPtr sigmoid(const VarPtr& a) {
    Tensor out(a->val.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->val[i]));
    return make_op(std::move(out), {a}, [](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            double y = self.val[i];
            g[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

VarPtr reshape(const VarPtr& a, std::vector<std::int64_t> shape) {
    if (Tensor::numel_of(shape) != a->val.numel())
        throw ShapeError("reshape: element count mismatch");
    Tensor out(std::move(shape), a->val.vec());
    return make_op(std::move(out), {a}, [](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
    });
}

// ---------------- reductions ----------------

VarPtr mean_all(const VarPtr& a) {
    Tensor out({1});
    double s = 0.0;
    for (std::int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
    out[0] = s / static_cast<double>(a->val.numel());
    return make_op(std::move(out), {a}, [](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        double gi = self.grad[0] / static_cast<double>(g.numel());
        for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += gi;
    });
}

VarPtr global_avg_pool(const VarPtr& x) {
    if (x->val.rank() != 3) throw ShapeError("global_avg_pool: expected {C,H,W}");
    const auto C = x->val.dim(0);
    const auto hw = x->val.dim(1) * x->val.dim(2);
    Tensor out({C});
    for (std::int64_t c = 0; c < C; ++c) {
        double s = 0.0;
        const double* p = x->val.data() + c * hw;
        for (std::int64_t i = 0; i < hw; ++i) s += p[i];
        out[c] = s / static_cast<double>(hw);
    }
    return make_op(std::move(out), {x}, [C, hw](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c) {
            double gi = self.grad[c] / static_cast<double>(hw);
            double* p = g.data() + c * hw;
            for (std::int64_t i = 0; i < hw; ++i) p[i] += gi;
        }
    });
}

VarPtr global_max_pool(const VarPtr& x) {
    if (x->val.rank() != 3) throw ShapeError("global_max_pool: expected {C,H,W}");
    const auto C = x->val.dim(0);
    const auto hw = x->val.dim(1) * x->val.dim(2);
    Tensor out({C});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(C);
    for (std::int64_t c = 0; c < C; ++c) {
        const double* p = x->val.data() + c * hw;
        std::int64_t best = 0;
        for (std::int64_t i = 1; i < hw; ++i)
            if (p[i] > p[best]) best = i;
        (*argmax)[c] = best;
        out[c] = p[best];
    }
    return make_op(std::move(out), {x}, [C, hw, argmax](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c) g[c * hw + (*argmax)[c]] += self.grad[c];
    });
}

// ---------------- convolution ----------------

namespace {

// col layout: {Cg*kh*kw, Hout*Wout} for one group, zero padding.
void im2col(const double* x, std::int64_t cg, std::int64_t h, std::int64_t w, int k, int stride,
            int pad, std::int64_t hout, std::int64_t wout, double* col) {
    for (std::int64_t c = 0; c < cg; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* dst = col + ((c * k + ky) * k + kx) * hout * wout;
                for (std::int64_t oy = 0; oy < hout; ++oy) {
                    std::int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) {
                        for (std::int64_t ox = 0; ox < wout; ++ox) dst[oy * wout + ox] = 0.0;
                        continue;
                    }
                    const double* src = x + (c * h + iy) * w;
                    for (std::int64_t ox = 0; ox < wout; ++ox) {
                        std::int64_t ix = ox * stride + kx - pad;
                        dst[oy * wout + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_acc(const double* col, std::int64_t cg, std::int64_t h, std::int64_t w, int k,
                int stride, int pad, std::int64_t hout, std::int64_t wout, double* gx) {
    for (std::int64_t c = 0; c < cg; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* src = col + ((c * k + ky) * k + kx) * hout * wout;
                for (std::int64_t oy = 0; oy < hout; ++oy) {
                    std::int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = gx + (c * h + iy) * w;
                    for (std::int64_t ox = 0; ox < wout; ++ox) {
                        std::int64_t ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += src[oy * wout + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad, int groups) {
    if (x->val.rank() != 3 || w->val.rank() != 4) throw ShapeError("conv2d: bad ranks");
    const auto cin = x->val.dim(0), h = x->val.dim(1), wd = x->val.dim(2);
    const auto cout = w->val.dim(0), cg = w->val.dim(1);
    const int k = static_cast<int>(w->val.dim(2));
    if (w->val.dim(2) != w->val.dim(3)) throw ShapeError("conv2d: non-square kernel");
    if (cin != cg * groups || cout % groups != 0)
        throw ShapeError("conv2d: channel/group mismatch");
    if (b && b->val.numel() != cout) throw ShapeError("conv2d: bias size mismatch");
    const std::int64_t hout = (h + 2 * pad - k) / stride + 1;
    const std::int64_t wout = (wd + 2 * pad - k) / stride + 1;
    if (hout < 1 || wout < 1) throw ShapeError("conv2d: output would be empty");
    const std::int64_t coutg = cout / groups;
    const std::int64_t ksz = cg * k * k;

    Tensor out({cout, hout, wout});
    std::vector<double> col(static_cast<std::size_t>(ksz) * hout * wout);
    for (int g = 0; g < groups; ++g) {
        im2col(x->val.data() + g * cg * h * wd, cg, h, wd, k, stride, pad, hout, wout, col.data());
        gemm_nn(static_cast<int>(coutg), static_cast<int>(hout * wout), static_cast<int>(ksz),
                w->val.data() + g * coutg * ksz, col.data(), out.data() + g * coutg * hout * wout,
                false);
    }
    if (b)
        for (std::int64_t c = 0; c < cout; ++c) {
            double bias = b->val[c];
            double* p = out.data() + c * hout * wout;
            for (std::int64_t i = 0; i < hout * wout; ++i) p[i] += bias;
        }

    std::vector<VarPtr> parents = b ? std::vector<VarPtr>{x, w, b} : std::vector<VarPtr>{x, w};
    auto backfn = [stride, pad, groups, k, cin, h, wd, cout, cg, coutg, ksz, hout,
                   wout](Var& self) {
        const VarPtr& xp = self.parents[0];
        const VarPtr& wp = self.parents[1];
        const VarPtr bp = self.parents.size() > 2 ? self.parents[2] : nullptr;
        std::vector<double> col(static_cast<std::size_t>(ksz) * hout * wout);
        std::vector<double> gcol;
        for (int g = 0; g < groups; ++g) {
            const double* gout = self.grad.data() + g * coutg * hout * wout;
            if (wp->requires_grad) {
                im2col(xp->val.data() + g * cg * h * wd, cg, h, wd, k, stride, pad, hout, wout,
                       col.data());
                gemm_nt(static_cast<int>(coutg), static_cast<int>(ksz),
                        static_cast<int>(hout * wout), gout, col.data(),
                        wp->ensure_grad().data() + g * coutg * ksz, true);
            }
            if (xp->requires_grad) {
                gcol.resize(static_cast<std::size_t>(ksz) * hout * wout);
                gemm_tn(static_cast<int>(ksz), static_cast<int>(hout * wout),
                        static_cast<int>(coutg), wp->val.data() + g * coutg * ksz, gout,
                        gcol.data(), false);
                col2im_acc(gcol.data(), cg, h, wd, k, stride, pad, hout, wout,
                           xp->ensure_grad().data() + g * cg * h * wd);
            }
        }
        if (bp && bp->requires_grad) {
            auto& gb = bp->ensure_grad();
            for (std::int64_t c = 0; c < cout; ++c) {
                const double* p = self.grad.data() + c * hout * wout;
                double s = 0.0;
                for (std::int64_t i = 0; i < hout * wout; ++i) s += p[i];
                gb[c] += s;
            }
        }
    };
    return make_op(std::move(out), std::move(parents), std::move(backfn));
}

VarPtr avg_pool2d(const VarPtr& x, int k) {
    if (x->val.rank() != 3) throw ShapeError("avg_pool2d: expected {C,H,W}");
    const auto C = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (h % k != 0 || w % k != 0) throw ShapeError("avg_pool2d: size not divisible by kernel");
    const auto oh = h / k, ow = w / k;
    Tensor out({C, oh, ow});
    const double inv = 1.0 / (k * k);
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t oy = 0; oy < oh; ++oy)
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                double s = 0.0;
                for (int dy = 0; dy < k; ++dy)
                    for (int dx = 0; dx < k; ++dx) s += x->val.at(c, oy * k + dy, ox * k + dx);
                out.at(c, oy, ox) = s * inv;
            }
    return make_op(std::move(out), {x}, [k, C, oh, ow, inv](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    double gv = self.grad.at(c, oy, ox) * inv;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx) g.at(c, oy * k + dy, ox * k + dx) += gv;
                }
    });
}

VarPtr nearest_upsample2(const VarPtr& x) {
    if (x->val.rank() != 3) throw ShapeError("nearest_upsample2: expected {C,H,W}");
    const auto C = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    Tensor out({C, 2 * h, 2 * w});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xx = 0; xx < w; ++xx) {
                double v = x->val.at(c, y, xx);
                out.at(c, 2 * y, 2 * xx) = v;
                out.at(c, 2 * y, 2 * xx + 1) = v;
                out.at(c, 2 * y + 1, 2 * xx) = v;
                out.at(c, 2 * y + 1, 2 * xx + 1) = v;
            }
    return make_op(std::move(out), {x}, [C, h, w](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t xx = 0; xx < w; ++xx)
                    g.at(c, y, xx) += self.grad.at(c, 2 * y, 2 * xx) +
                                      self.grad.at(c, 2 * y, 2 * xx + 1) +
                                      self.grad.at(c, 2 * y + 1, 2 * xx) +
                                      self.grad.at(c, 2 * y + 1, 2 * xx + 1);
    });
}

VarPtr concat_channels(const std::vector<VarPtr>& xs) {
    if (xs.empty()) throw ShapeError("concat_channels: empty input list");
    const auto h = xs[0]->val.dim(1), w = xs[0]->val.dim(2);
    std::int64_t ctot = 0;
    for (const auto& x : xs) {
        if (x->val.rank() != 3 || x->val.dim(1) != h || x->val.dim(2) != w)
            throw ShapeError("concat_channels: spatial mismatch");
        ctot += x->val.dim(0);
    }
    Tensor out({ctot, h, w});
    std::int64_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.data(), x->val.data() + x->val.numel(), out.data() + off);
        off += x->val.numel();
    }
    return make_op(std::move(out), xs, [](Var& self) {
        std::int64_t off = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[off + i];
            }
            off += p->val.numel();
        }
    });
}

VarPtr slice_channels(const VarPtr& x, int from, int count) {
    if (x->val.rank() != 3) throw ShapeError("slice_channels: expected {C,H,W}");
    const auto C = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (from < 0 || from + count > C) throw ShapeError("slice_channels: range out of bounds");
    Tensor out({count, h, w});
    const std::int64_t hw = h * w;
    std::copy(x->val.data() + from * hw, x->val.data() + (from + count) * hw, out.data());
    return make_op(std::move(out), {x}, [from, hw](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.numel(); ++i) g[from * hw + i] += self.grad[i];
    });
}

VarPtr channel_scale(const VarPtr& x, const VarPtr& s) {
    if (x->val.rank() != 3 || s->val.rank() != 1 || s->val.dim(0) != x->val.dim(0))
        throw ShapeError("channel_scale: shape mismatch");
    const auto C = x->val.dim(0);
    const auto hw = x->val.dim(1) * x->val.dim(2);
    Tensor out(x->val.shape());
    for (std::int64_t c = 0; c < C; ++c) {
        const double sc = s->val[c];
        const double* px = x->val.data() + c * hw;
        double* po = out.data() + c * hw;
        for (std::int64_t i = 0; i < hw; ++i) po[i] = px[i] * sc;
    }
    return make_op(std::move(out), {x, s}, [C, hw](Var& self) {
        const VarPtr& xp = self.parents[0];
        const VarPtr& sp = self.parents[1];
        if (xp->requires_grad) {
            auto& g = xp->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c) {
                const double sc = sp->val[c];
                const double* pg = self.grad.data() + c * hw;
                double* px = g.data() + c * hw;
                for (std::int64_t i = 0; i < hw; ++i) px[i] += pg[i] * sc;
            }
        }
        if (sp->requires_grad) {
            auto& g = sp->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c) {
                const double* pg = self.grad.data() + c * hw;
                const double* px = xp->val.data() + c * hw;
                double acc = 0.0;
                for (std::int64_t i = 0; i < hw; ++i) acc += pg[i] * px[i];
                g[c] += acc;
            }
        }
    });
}

VarPtr broadcast_mul_map(const VarPtr& x, const VarPtr& m) {
    if (x->val.rank() != 3 || m->val.rank() != 3 || m->val.dim(0) != 1 ||
        m->val.dim(1) != x->val.dim(1) || m->val.dim(2) != x->val.dim(2))
        throw ShapeError("broadcast_mul_map: shape mismatch");
    const auto C = x->val.dim(0);
    const auto hw = x->val.dim(1) * x->val.dim(2);
    Tensor out(x->val.shape());
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < hw; ++i) out[c * hw + i] = x->val[c * hw + i] * m->val[i];
    return make_op(std::move(out), {x, m}, [C, hw](Var& self) {
        const VarPtr& xp = self.parents[0];
        const VarPtr& mp = self.parents[1];
        if (xp->requires_grad) {
            auto& g = xp->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < hw; ++i)
                    g[c * hw + i] += self.grad[c * hw + i] * mp->val[i];
        }
        if (mp->requires_grad) {
            auto& g = mp->ensure_grad();
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t i = 0; i < hw; ++i)
                    g[i] += self.grad[c * hw + i] * xp->val[c * hw + i];
        }
    });
}

VarPtr layer_norm_channels(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta, double eps) {
    if (x->val.rank() != 3) throw ShapeError("layer_norm_channels: expected {C,H,W}");
    const auto C = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (gamma->val.numel() != C || beta->val.numel() != C)
        throw ShapeError("layer_norm_channels: affine size mismatch");
    const auto hw = h * w;
    Tensor out(x->val.shape());
    auto mu = std::make_shared<std::vector<double>>(hw);
    auto istd = std::make_shared<std::vector<double>>(hw);
    for (std::int64_t i = 0; i < hw; ++i) {
        double m = 0.0;
        for (std::int64_t c = 0; c < C; ++c) m += x->val[c * hw + i];
        m /= static_cast<double>(C);
        double v = 0.0;
        for (std::int64_t c = 0; c < C; ++c) {
            double d = x->val[c * hw + i] - m;
            v += d * d;
        }
        v /= static_cast<double>(C);
        (*mu)[i] = m;
        (*istd)[i] = 1.0 / std::sqrt(v + eps);
        for (std::int64_t c = 0; c < C; ++c)
            out[c * hw + i] =
                (x->val[c * hw + i] - m) * (*istd)[i] * gamma->val[c] + beta->val[c];
    }
    return make_op(std::move(out), {x, gamma, beta}, [C, hw, mu, istd](Var& self) {
        const VarPtr& xp = self.parents[0];
        const VarPtr& gp = self.parents[1];
        const VarPtr& bp = self.parents[2];
        // xhat per position, reused for all three gradients
        for (std::int64_t i = 0; i < hw; ++i) {
            double m = (*mu)[i], is = (*istd)[i];
            if (xp->requires_grad) {
                // dL/dxhat_c = g_c * gamma_c; standard layernorm backward
                double sum_gxh = 0.0, sum_gxh_xhat = 0.0;
                for (std::int64_t c = 0; c < C; ++c) {
                    double xhat = (xp->val[c * hw + i] - m) * is;
                    double gxh = self.grad[c * hw + i] * gp->val[c];
                    sum_gxh += gxh;
                    sum_gxh_xhat += gxh * xhat;
                }
                auto& gx = xp->ensure_grad();
                const double invC = 1.0 / static_cast<double>(C);
                for (std::int64_t c = 0; c < C; ++c) {
                    double xhat = (xp->val[c * hw + i] - m) * is;
                    double gxh = self.grad[c * hw + i] * gp->val[c];
                    gx[c * hw + i] += is * (gxh - invC * sum_gxh - invC * xhat * sum_gxh_xhat);
                }
            }
            if (gp->requires_grad) {
                auto& gg = gp->ensure_grad();
                for (std::int64_t c = 0; c < C; ++c) {
                    double xhat = (xp->val[c * hw + i] - m) * is;
                    gg[c] += self.grad[c * hw + i] * xhat;
                }
            }
            if (bp->requires_grad) {
                auto& gb = bp->ensure_grad();
                for (std::int64_t c = 0; c < C; ++c) gb[c] += self.grad[c * hw + i];
            }
        }
    });
}

VarPtr haar_dwt2(const VarPtr& x) {
    if (x->val.rank() != 3) throw ShapeError("haar_dwt2: expected {C,H,W}");
    const auto C = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
    if (h % 2 != 0 || w % 2 != 0) throw ShapeError("haar_dwt2: H and W must be even");
    const auto bh = h / 2, bw = w / 2, bhw = bh * bw;
    Tensor out({4 * C, bh, bw});
    for (std::int64_t c = 0; c < C; ++c)
        wavelet::haar_fwd_plane(x->val.data() + c * h * w, static_cast<int>(h),
                                static_cast<int>(w), static_cast<int>(w),
                                out.data() + (0 * C + c) * bhw, out.data() + (1 * C + c) * bhw,
                                out.data() + (2 * C + c) * bhw, out.data() + (3 * C + c) * bhw,
                                static_cast<int>(bw));
    return make_op(std::move(out), {x}, [C, h, w, bh, bw, bhw](Var& self) {
        auto& gx = self.parents[0]->ensure_grad();
        std::vector<double> plane(static_cast<std::size_t>(h) * w);
        for (std::int64_t c = 0; c < C; ++c) {
            wavelet::haar_inv_plane(self.grad.data() + (0 * C + c) * bhw,
                                    self.grad.data() + (1 * C + c) * bhw,
                                    self.grad.data() + (2 * C + c) * bhw,
                                    self.grad.data() + (3 * C + c) * bhw, static_cast<int>(bh),
                                    static_cast<int>(bw), static_cast<int>(bw), plane.data(),
                                    static_cast<int>(h), static_cast<int>(w),
                                    static_cast<int>(w));
            double* dst = gx.data() + c * h * w;
            for (std::int64_t i = 0; i < h * w; ++i) dst[i] += plane[i];
        }
    });
}

// ---------------- vectors / tokens ----------------

VarPtr softmax_vec(const VarPtr& v) {
    if (v->val.rank() != 1) throw ShapeError("softmax_vec: expected a vector");
    const auto n = v->val.dim(0);
    Tensor out({n});
    double mx = v->val[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, v->val[i]);
    double z = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        out[i] = std::exp(v->val[i] - mx);
        z += out[i];
    }
    for (std::int64_t i = 0; i < n; ++i) out[i] /= z;
    return make_op(std::move(out), {v}, [n](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        double dot = 0.0;
        for (std::int64_t i = 0; i < n; ++i) dot += self.grad[i] * self.val[i];
        for (std::int64_t i = 0; i < n; ++i) g[i] += self.val[i] * (self.grad[i] - dot);
    });
}

VarPtr softmax_rows(const VarPtr& m) {
    if (m->val.rank() != 2) throw ShapeError("softmax_rows: expected a matrix");
    const auto rows = m->val.dim(0), cols = m->val.dim(1);
    Tensor out(m->val.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* src = m->val.data() + r * cols;
        double* dst = out.data() + r * cols;
        double mx = src[0];
        for (std::int64_t i = 1; i < cols; ++i) mx = std::max(mx, src[i]);
        double z = 0.0;
        for (std::int64_t i = 0; i < cols; ++i) {
            dst[i] = std::exp(src[i] - mx);
            z += dst[i];
        }
        for (std::int64_t i = 0; i < cols; ++i) dst[i] /= z;
    }
    return make_op(std::move(out), {m}, [rows, cols](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = self.val.data() + r * cols;
            const double* gy = self.grad.data() + r * cols;
            double dot = 0.0;
            for (std::int64_t i = 0; i < cols; ++i) dot += gy[i] * y[i];
            double* dst = g.data() + r * cols;
            for (std::int64_t i = 0; i < cols; ++i) dst[i] += y[i] * (gy[i] - dot);
        }
    });
}

VarPtr channel_dot(const VarPtr& a, const VarPtr& b, double scale) {
    check_same_shape(a->val, b->val, "channel_dot");
    if (a->val.rank() != 3) throw ShapeError("channel_dot: expected {C,H,W}");
    const auto C = a->val.dim(0);
    const auto hw = a->val.dim(1) * a->val.dim(2);
    Tensor out({C});
    for (std::int64_t c = 0; c < C; ++c) {
        const double* pa = a->val.data() + c * hw;
        const double* pb = b->val.data() + c * hw;
        double s = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) s += pa[i] * pb[i];
        out[c] = s * scale;
    }
    return make_op(std::move(out), {a, b}, [C, hw, scale](Var& self) {
        const VarPtr& ap = self.parents[0];
        const VarPtr& bp = self.parents[1];
        for (std::int64_t c = 0; c < C; ++c) {
            double gc = self.grad[c] * scale;
            if (ap->requires_grad) {
                auto& g = ap->ensure_grad();
                const double* pb = bp->val.data() + c * hw;
                double* pg = g.data() + c * hw;
                for (std::int64_t i = 0; i < hw; ++i) pg[i] += gc * pb[i];
            }
            if (bp->requires_grad) {
                auto& g = bp->ensure_grad();
                const double* pa = ap->val.data() + c * hw;
                double* pg = g.data() + c * hw;
                for (std::int64_t i = 0; i < hw; ++i) pg[i] += gc * pa[i];
            }
        }
    });
}

VarPtr flatten_hw(const VarPtr& x) {
    if (x->val.rank() != 3) throw ShapeError("flatten_hw: expected {C,H,W}");
    const auto C = x->val.dim(0);
    const auto hw = x->val.dim(1) * x->val.dim(2);
    Tensor out({hw, C});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < hw; ++i) out[i * C + c] = x->val[c * hw + i];
    return make_op(std::move(out), {x}, [C, hw](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < hw; ++i) g[c * hw + i] += self.grad[i * C + c];
    });
}

VarPtr unflatten_hw(const VarPtr& t, int h, int w) {
    if (t->val.rank() != 2) throw ShapeError("unflatten_hw: expected {T,C}");
    const auto hw = t->val.dim(0), C = t->val.dim(1);
    if (hw != static_cast<std::int64_t>(h) * w) throw ShapeError("unflatten_hw: token count mismatch");
    Tensor out({C, h, w});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < hw; ++i) out[c * hw + i] = t->val[i * C + c];
    return make_op(std::move(out), {t}, [C, hw](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < hw; ++i) g[i * C + c] += self.grad[c * hw + i];
    });
}

VarPtr matmul(const VarPtr& a, const VarPtr& b) {
    if (a->val.rank() != 2 || b->val.rank() != 2 || a->val.dim(1) != b->val.dim(0))
        throw ShapeError("matmul: incompatible shapes " + a->val.shape_str() + " x " +
                         b->val.shape_str());
    const auto m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(1);
    Tensor out({m, n});
    gemm_nn(static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), a->val.data(),
            b->val.data(), out.data(), false);
    return make_op(std::move(out), {a, b}, [m, k, n](Var& self) {
        const VarPtr& ap = self.parents[0];
        const VarPtr& bp = self.parents[1];
        if (ap->requires_grad)
            gemm_nt(static_cast<int>(m), static_cast<int>(k), static_cast<int>(n),
                    self.grad.data(), bp->val.data(), ap->ensure_grad().data(), true);
        if (bp->requires_grad)
            gemm_tn(static_cast<int>(k), static_cast<int>(n), static_cast<int>(m), ap->val.data(),
                    self.grad.data(), bp->ensure_grad().data(), true);
    });
}

VarPtr matmul_nt(const VarPtr& a, const VarPtr& b) {
    if (a->val.rank() != 2 || b->val.rank() != 2 || a->val.dim(1) != b->val.dim(1))
        throw ShapeError("matmul_nt: incompatible shapes");
    const auto m = a->val.dim(0), k = a->val.dim(1), n = b->val.dim(0);
    Tensor out({m, n});
    gemm_nt(static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), a->val.data(),
            b->val.data(), out.data(), false);
    return make_op(std::move(out), {a, b}, [m, k, n](Var& self) {
        const VarPtr& ap = self.parents[0];
        const VarPtr& bp = self.parents[1];
        if (ap->requires_grad)
            gemm_nn(static_cast<int>(m), static_cast<int>(k), static_cast<int>(n),
                    self.grad.data(), bp->val.data(), ap->ensure_grad().data(), true);
        if (bp->requires_grad)
            gemm_tn(static_cast<int>(n), static_cast<int>(k), static_cast<int>(m),
                    self.grad.data(), ap->val.data(), bp->ensure_grad().data(), true);
    });
}

VarPtr bias_add_rows(const VarPtr& t, const VarPtr& b) {
    if (t->val.rank() != 2 || b->val.rank() != 1 || b->val.dim(0) != t->val.dim(1))
        throw ShapeError("bias_add_rows: shape mismatch");
    const auto rows = t->val.dim(0), cols = t->val.dim(1);
    Tensor out(t->val.shape());
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) out[r * cols + c] = t->val[r * cols + c] + b->val[c];
    return make_op(std::move(out), {t, b}, [rows, cols](Var& self) {
        if (self.parents[0]->requires_grad) {
            auto& g = self.parents[0]->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g[i] += self.grad[i];
        }
        if (self.parents[1]->requires_grad) {
            auto& g = self.parents[1]->ensure_grad();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
        }
    });
}

VarPtr col_slice(const VarPtr& t, int from, int count) {
    if (t->val.rank() != 2) throw ShapeError("col_slice: expected a matrix");
    const auto rows = t->val.dim(0), cols = t->val.dim(1);
    if (from < 0 || from + count > cols) throw ShapeError("col_slice: range out of bounds");
    Tensor out({rows, count});
    for (std::int64_t r = 0; r < rows; ++r)
        for (int c = 0; c < count; ++c) out[r * count + c] = t->val[r * cols + from + c];
    return make_op(std::move(out), {t}, [rows, cols, from, count](Var& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
            for (int c = 0; c < count; ++c) g[r * cols + from + c] += self.grad[r * count + c];
    });
}

VarPtr concat_cols(const std::vector<VarPtr>& ts) {
    if (ts.empty()) throw ShapeError("concat_cols: empty input list");
    const auto rows = ts[0]->val.dim(0);
    std::int64_t ctot = 0;
    for (const auto& t : ts) {
        if (t->val.rank() != 2 || t->val.dim(0) != rows) throw ShapeError("concat_cols: row mismatch");
        ctot += t->val.dim(1);
    }
    Tensor out({rows, ctot});
    std::int64_t off = 0;
    for (const auto& t : ts) {
        const auto c = t->val.dim(1);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < c; ++j) out[r * ctot + off + j] = t->val[r * c + j];
        off += c;
    }
    return make_op(std::move(out), ts, [rows, ctot](Var& self) {
        std::int64_t off = 0;
        for (auto& p : self.parents) {
            const auto c = p->val.dim(1);
            if (p->requires_grad) {
                auto& g = p->ensure_grad();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < c; ++j)
                        g[r * c + j] += self.grad[r * ctot + off + j];
            }
            off += c;
        }
    });
}

}  // namespace rln2::nn
