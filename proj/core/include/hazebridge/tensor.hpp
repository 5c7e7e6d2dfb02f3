#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hazebridge/common.hpp"
#include "hazebridge/rng.hpp"

namespace hazebridge {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorImpl;
}

// Dense row-major tensor with reverse-mode autodiff. A Tensor is a cheap
// handle onto a graph node; forward values are immutable once built (grads
// accumulate in place). Recording happens define-by-run: an op tapes itself
// whenever any input requires grad and grad mode is on.
class Tensor {
public:
    Tensor();  // empty (numel 0, rank 0 shape); distinct from a scalar

    static Tensor zeros(const Shape& shape);
    static Tensor ones(const Shape& shape);
    static Tensor full(const Shape& shape, real value);
    static Tensor scalar(real value);  // rank-0
    static Tensor from_data(const Shape& shape, std::vector<real> values);
    static Tensor randn(const Shape& shape, Rng& rng);
    static Tensor uniform(const Shape& shape, real lo, real hi, Rng& rng);

    bool defined() const;
    const Shape& shape() const;
    int64_t ndim() const;
    int64_t numel() const;
    int64_t extent(int64_t axis) const;  // negative axis wraps

    std::span<const real> data() const;
    std::span<real> mutable_data();  // leaf edits only (optimizers, loaders)
    real item() const;               // numel-1 tensors

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on);
    bool has_tape() const;  // true when this node records parents

    // Gradient accumulated by the last backward() that reached this tensor.
    std::span<const real> grad() const;
    bool has_grad() const;
    void zero_grad();

    Tensor detach() const;  // same values, cut from the graph
    Tensor clone() const;

    // Internal node access for op implementations.
    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

// ---- autodiff -------------------------------------------------------------

// Reverse sweep from a scalar loss. Each reachable node is visited exactly
// once in reverse topological order; leaf grads accumulate additively.
void backward(const Tensor& loss);

bool grad_enabled();

// Suspends taping (sampling, data synthesis, evaluation).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Max over coordinates of the relative error between the reverse-mode
// gradient of f at x and a central finite difference with step eps.
real grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, real eps);

// ---- elementwise / broadcast ops -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, real b);
Tensor sub(const Tensor& a, real b);
Tensor rsub(real a, const Tensor& b);  // a - b
Tensor mul(const Tensor& a, real b);
Tensor div(const Tensor& a, real b);
Tensor rdiv(real a, const Tensor& b);  // a / b

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, real b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, real b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, real b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, real b) { return div(a, b); }
inline Tensor operator+(real a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(real a, const Tensor& b) { return rsub(a, b); }
inline Tensor operator*(real a, const Tensor& b) { return mul(b, a); }
inline Tensor operator/(real a, const Tensor& b) { return rdiv(a, b); }
inline Tensor operator-(const Tensor& a) { return mul(a, real(-1)); }

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // checked mode: domain error for a < 0
Tensor sqrt(const Tensor& a);  // checked mode: domain error for a < 0
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, real slope = real(0.2));
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp_min(const Tensor& a, real lo);
Tensor clamp(const Tensor& a, real lo, real hi);

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, int64_t axis, bool keepdim = false);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, int64_t axis, bool keepdim = false);

// Differentiable min along one axis; gradient routes to the (first) argmin.
Tensor reduce_min(const Tensor& a, int64_t axis, bool keepdim = false);

// Row-wise max as a constant (no tape); used for stable softmax shifts.
Tensor detached_max(const Tensor& a, int64_t axis, bool keepdim = false);

Tensor softmax(const Tensor& a, int64_t axis);
Tensor log_softmax(const Tensor& a, int64_t axis);

// ---- shape / indexing -------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape);  // one extent may be -1
Tensor transpose(const Tensor& a, int64_t axis0, int64_t axis1);
Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t end);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);
Tensor index_select(const Tensor& a, int64_t axis, const std::vector<int64_t>& indices);

// ---- linear algebra ----------------------------------------------------------

// matmul: [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// bmm: [B,m,k] x [B,k,n] -> [B,m,n]; a rank-2 side broadcasts over B.
Tensor bmm(const Tensor& a, const Tensor& b);

// ---- image ops (NCHW) ---------------------------------------------------------

enum class PadMode { Zero, Replicate };

Tensor pad2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right,
             PadMode mode = PadMode::Zero);

// conv2d: x [B,Ci,H,W], w [Co,Ci,kh,kw], optional bias [Co]; zero padding.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride = 1,
              int64_t pad = 0);

// Sliding-window min with replicate edges, stride 1, odd window.
Tensor min_pool2d(const Tensor& x, int64_t window);

// Per-sample, per-channel spatial normalization with affine parameters
// gamma/beta of shape [1,C,1,1]. Fused forward and backward.
Tensor instance_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, real eps);

Tensor upsample_nearest2x(const Tensor& x);

namespace detail {
// im2col: x [B,Ci,H,W] -> [B, Ci*kh*kw, Ho*Wo] (zero padding).
Tensor im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad);
}

}  // namespace hazebridge
