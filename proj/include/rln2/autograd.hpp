#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rln2/tensor.hpp"

namespace rln2::nn {

// Reverse-mode autodiff over double tensors. Graphs are built dynamically;
// backward() walks the tape in reverse topological order and accumulates
// gradients into every reachable node with requires_grad set.
struct Var;
using VarPtr = std::shared_ptr<Var>;

struct Var {
    Tensor val;
    Tensor grad;  // allocated on first accumulation, same shape as val
    bool requires_grad = false;
    std::string name;  // parameters only
    std::vector<VarPtr> parents;
    std::function<void(Var&)> backfn;

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor(val.shape());
        return grad;
    }
    void zero_grad() {
        if (!grad.empty()) grad.fill(0.0);
    }
};

VarPtr constant(Tensor v);
VarPtr leaf(Tensor v);  // requires_grad input (for op-level gradient checks)
VarPtr param(const std::string& name, Tensor v);

// root must be a single-element tensor; seeds d(root)/d(root) = 1.
void backward(const VarPtr& root);

// ---- elementwise ----
VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr mul(const VarPtr& a, const VarPtr& b);
VarPtr add_scalar(const VarPtr& a, double s);
VarPtr mul_scalar(const VarPtr& a, double s);
VarPtr abs_(const VarPtr& a);
VarPtr relu(const VarPtr& a);
VarPtr gelu(const VarPtr& a);
VarPtr sigmoid(const VarPtr& a);

// ---- reductions ----
VarPtr reshape(const VarPtr& a, std::vector<std::int64_t> shape);  // same numel
VarPtr mean_all(const VarPtr& a);  // -> {1}
VarPtr global_avg_pool(const VarPtr& x);  // {C,H,W} -> {C}
VarPtr global_max_pool(const VarPtr& x);  // {C,H,W} -> {C}

// ---- feature-map ops ({C,H,W}) ----
VarPtr conv2d(const VarPtr& x, const VarPtr& w, const VarPtr& b, int stride, int pad,
              int groups = 1);  // b may be null
VarPtr avg_pool2d(const VarPtr& x, int k);         // non-overlapping k x k
VarPtr nearest_upsample2(const VarPtr& x);
VarPtr concat_channels(const std::vector<VarPtr>& xs);
VarPtr slice_channels(const VarPtr& x, int from, int count);
VarPtr channel_scale(const VarPtr& x, const VarPtr& s);       // s {C}
VarPtr broadcast_mul_map(const VarPtr& x, const VarPtr& m);   // m {1,H,W}
VarPtr layer_norm_channels(const VarPtr& x, const VarPtr& gamma, const VarPtr& beta,
                           double eps = 1e-6);

// Orthonormal single-level Haar DWT, {C,H,W} -> {4C,H/2,W/2}, bands stacked
// [LL | LH | HL | HH]. H and W must be even. The adjoint of an orthonormal
// transform is its inverse, so backward applies the synthesis filter bank.
VarPtr haar_dwt2(const VarPtr& x);

// ---- vectors and token matrices ----
VarPtr softmax_vec(const VarPtr& v);                       // {N}
VarPtr softmax_rows(const VarPtr& m);                      // {M,N}
VarPtr channel_dot(const VarPtr& a, const VarPtr& b, double scale);  // -> {C}
VarPtr flatten_hw(const VarPtr& x);                        // {C,H,W} -> {HW,C}
VarPtr unflatten_hw(const VarPtr& t, int h, int w);        // {HW,C} -> {C,H,W}
VarPtr matmul(const VarPtr& a, const VarPtr& b);           // {M,K}x{K,N}
VarPtr matmul_nt(const VarPtr& a, const VarPtr& b);        // {M,K}x{N,K}^T -> {M,N}
VarPtr bias_add_rows(const VarPtr& t, const VarPtr& b);    // t {T,C}, b {C}
VarPtr col_slice(const VarPtr& t, int from, int count);    // {T,C} -> {T,count}
VarPtr concat_cols(const std::vector<VarPtr>& ts);

// Row-major GEMM helpers (Eigen-backed). C = alpha * op(A)*op(B) + beta * C.
void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

}  // namespace rln2::nn
