#include <algorithm>
#include <cmath>

#include "tensor_impl.hpp"

// Elementwise ops, broadcasting, reductions and indexing. Broadcast follows
// the usual right-aligned rule: trailing extents must match or be 1.

namespace hazebridge {

using detail::make_op_result;
using detail::normalize_axis;
using detail::row_major_strides;
using detail::TensorImpl;

namespace {

struct BcPlan {
    Shape out;
    std::vector<int64_t> sa, sb;  // strides into a/b, 0 on broadcast axes
    bool same_shape;
};

BcPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    const int64_t ra = static_cast<int64_t>(a.size());
    const int64_t rb = static_cast<int64_t>(b.size());
    const int64_t r = std::max(ra, rb);
    Shape out(r);
    for (int64_t i = 0; i < r; ++i) {
        const int64_t ea = i < r - ra ? 1 : a[i - (r - ra)];
        const int64_t eb = i < r - rb ? 1 : b[i - (r - rb)];
        if (ea != eb && ea != 1 && eb != 1)
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                             shape_str(b));
        out[i] = std::max(ea, eb);
    }
    BcPlan p;
    p.same_shape = (a == b);
    auto sta = row_major_strides(a);
    auto stb = row_major_strides(b);
    p.sa.assign(r, 0);
    p.sb.assign(r, 0);
    for (int64_t i = 0; i < r; ++i) {
        if (i >= r - ra && a[i - (r - ra)] != 1) p.sa[i] = sta[i - (r - ra)];
        if (i >= r - rb && b[i - (r - rb)] != 1) p.sb[i] = stb[i - (r - rb)];
    }
    p.out = std::move(out);
    return p;
}

// Length of the trailing contiguous run over which one side is constant:
// the other side must span the full output there. Covers the hot patterns
// ([B,C,H,W] against [1,C,1,1] affine/bias terms, row-wise normalizers).
int64_t trailing_run(const BcPlan& p, const std::vector<int64_t>& s_bcast,
                     const std::vector<int64_t>& s_full) {
    const int64_t r = static_cast<int64_t>(p.out.size());
    int64_t inner = 1;
    int64_t expect = 1;
    for (int64_t ax = r - 1; ax >= 0; --ax) {
        if (s_bcast[ax] != 0) break;
        if (p.out[ax] > 1 && s_full[ax] != expect) break;
        inner *= p.out[ax];
        expect = inner;
    }
    return inner;
}

// Visit trailing runs: f(start index, offset into the broadcast side, len).
// The full side's offset equals the output index inside each run.
template <class F>
void bc_iterate_runs(const BcPlan& p, const std::vector<int64_t>& s_bcast, int64_t inner, F&& f) {
    const int64_t r = static_cast<int64_t>(p.out.size());
    const int64_t n = shape_numel(p.out);
    // how many trailing axes the run spans
    int64_t span = 1, ax_lo = r;
    while (ax_lo > 0 && span < inner) {
        --ax_lo;
        span *= p.out[ax_lo];
    }
    std::vector<int64_t> idx(ax_lo, 0);
    int64_t ob = 0;
    for (int64_t i = 0; i < n; i += inner) {
        f(i, ob, inner);
        for (int64_t ax = ax_lo - 1; ax >= 0; --ax) {
            ob += s_bcast[ax];
            if (++idx[ax] < p.out[ax]) break;
            ob -= s_bcast[ax] * p.out[ax];
            idx[ax] = 0;
        }
    }
}

// Visit every output element with the matching offsets into both operands.
template <class F>
void bc_iterate(const BcPlan& p, F&& f) {
    const int64_t r = static_cast<int64_t>(p.out.size());
    const int64_t n = shape_numel(p.out);
    if (n == 0) return;
    std::vector<int64_t> idx(r, 0);
    int64_t oa = 0, ob = 0;
    for (int64_t i = 0;;) {
        f(i, oa, ob);
        if (++i == n) break;
        for (int64_t ax = r - 1;; --ax) {
            oa += p.sa[ax];
            ob += p.sb[ax];
            if (++idx[ax] < p.out[ax]) break;
            oa -= p.sa[ax] * p.out[ax];
            ob -= p.sb[ax] * p.out[ax];
            idx[ax] = 0;
        }
    }
}

template <class Fwd, class DfA, class DfB>
Tensor binary_impl(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, DfA dfa, DfB dfb) {
    BcPlan p = plan_broadcast(a.shape(), b.shape(), name);
    const auto& av = a.impl()->data;
    const auto& bv = b.impl()->data;
    const bool b_scalar = bv.size() == 1;
    const bool a_scalar = av.size() == 1 && !b_scalar;
    const bool a_full = static_cast<int64_t>(av.size()) == shape_numel(p.out);
    const bool b_full = static_cast<int64_t>(bv.size()) == shape_numel(p.out);
    const int64_t run_b = (!p.same_shape && a_full && !b_scalar) ? trailing_run(p, p.sb, p.sa) : 1;
    const int64_t run_a = (!p.same_shape && b_full && !a_scalar) ? trailing_run(p, p.sa, p.sb) : 1;
    std::vector<real> out(shape_numel(p.out));
    if (p.same_shape) {
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    } else if (b_scalar) {
        const real s = bv[0];
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], s);
    } else if (a_scalar) {
        const real s = av[0];
        for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(s, bv[i]);
    } else if (run_b > 1) {
        bc_iterate_runs(p, p.sb, run_b, [&](int64_t i, int64_t ob, int64_t len) {
            const real s = bv[ob];
            for (int64_t j = 0; j < len; ++j) out[i + j] = fwd(av[i + j], s);
        });
    } else if (run_a > 1) {
        bc_iterate_runs(p, p.sa, run_a, [&](int64_t i, int64_t oa, int64_t len) {
            const real s = av[oa];
            for (int64_t j = 0; j < len; ++j) out[i + j] = fwd(s, bv[i + j]);
        });
    } else {
        bc_iterate(p, [&](int64_t i, int64_t oa, int64_t ob) { out[i] = fwd(av[oa], bv[ob]); });
    }
    Tensor ta = a, tb = b;
    return make_op_result(p.out, std::move(out), {a, b},
                          [ta, tb, p, run_a, run_b, dfa, dfb](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        TensorImpl* ib = tb.impl().get();
        const auto& go = self.grad;
        const auto& av = ia->data;
        const auto& bv = ib->data;
        const bool wa = ia->requires_grad;
        const bool wb = ib->requires_grad;
        if (wa) ia->ensure_grad();
        if (wb) ib->ensure_grad();
        if (p.same_shape) {
            for (size_t i = 0; i < go.size(); ++i) {
                if (wa) ia->grad[i] += go[i] * dfa(av[i], bv[i]);
                if (wb) ib->grad[i] += go[i] * dfb(av[i], bv[i]);
            }
        } else if (bv.size() == 1) {
            const real s = bv[0];
            real gb_acc = 0;
            for (size_t i = 0; i < go.size(); ++i) {
                if (wa) ia->grad[i] += go[i] * dfa(av[i], s);
                if (wb) gb_acc += go[i] * dfb(av[i], s);
            }
            if (wb) ib->grad[0] += gb_acc;
        } else if (av.size() == 1) {
            const real s = av[0];
            real ga_acc = 0;
            for (size_t i = 0; i < go.size(); ++i) {
                if (wa) ga_acc += go[i] * dfa(s, bv[i]);
                if (wb) ib->grad[i] += go[i] * dfb(s, bv[i]);
            }
            if (wa) ia->grad[0] += ga_acc;
        } else if (run_b > 1) {
            bc_iterate_runs(p, p.sb, run_b, [&](int64_t i, int64_t ob, int64_t len) {
                const real s = bv[ob];
                if (wa)
                    for (int64_t j = 0; j < len; ++j) ia->grad[i + j] += go[i + j] * dfa(av[i + j], s);
                if (wb) {
                    real acc = 0;
                    for (int64_t j = 0; j < len; ++j) acc += go[i + j] * dfb(av[i + j], s);
                    ib->grad[ob] += acc;
                }
            });
        } else if (run_a > 1) {
            bc_iterate_runs(p, p.sa, run_a, [&](int64_t i, int64_t oa, int64_t len) {
                const real s = av[oa];
                if (wb)
                    for (int64_t j = 0; j < len; ++j) ib->grad[i + j] += go[i + j] * dfb(s, bv[i + j]);
                if (wa) {
                    real acc = 0;
                    for (int64_t j = 0; j < len; ++j) acc += go[i + j] * dfa(s, bv[i + j]);
                    ia->grad[oa] += acc;
                }
            });
        } else {
            bc_iterate(p, [&](int64_t i, int64_t oa, int64_t ob) {
                if (wa) ia->grad[oa] += go[i] * dfa(av[oa], bv[ob]);
                if (wb) ib->grad[ob] += go[i] * dfb(av[oa], bv[ob]);
            });
        }
    });
}

template <class Fwd, class Df>
Tensor unary_impl(const Tensor& a, [[maybe_unused]] const char* name, Fwd fwd, Df df) {
    const auto& av = a.impl()->data;
    std::vector<real> out(av.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
    Tensor ta = a;
    return make_op_result(a.shape(), std::move(out), {a}, [ta, df](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        const auto& go = self.grad;
        const auto& av = ia->data;
        const auto& ov = self.data;
        for (size_t i = 0; i < go.size(); ++i) ia->grad[i] += go[i] * df(av[i], ov[i]);
    });
}

}  // namespace

// ---- binary ---------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "add", [](real x, real y) { return x + y; }, [](real, real) { return real(1); },
        [](real, real) { return real(1); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "sub", [](real x, real y) { return x - y; }, [](real, real) { return real(1); },
        [](real, real) { return real(-1); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "mul", [](real x, real y) { return x * y; }, [](real, real y) { return y; },
        [](real x, real) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_impl(
        a, b, "div", [](real x, real y) { return x / y; }, [](real, real y) { return real(1) / y; },
        [](real x, real y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, real b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, real b) { return sub(a, Tensor::scalar(b)); }
Tensor rsub(real a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, real b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, real b) { return div(a, Tensor::scalar(b)); }
Tensor rdiv(real a, const Tensor& b) { return div(Tensor::scalar(a), b); }

// ---- unary ----------------------------------------------------------------

Tensor exp(const Tensor& a) {
    return unary_impl(
        a, "exp", [](real x) { return std::exp(x); }, [](real, real o) { return o; });
}

Tensor log(const Tensor& a) {
    if (checked_mode()) {
        for (real x : a.data())
            if (x < 0) throw DomainError("log: negative input");
    }
    return unary_impl(
        a, "log", [](real x) { return std::log(x); }, [](real x, real) { return real(1) / x; });
}

Tensor sqrt(const Tensor& a) {
    if (checked_mode()) {
        for (real x : a.data())
            if (x < 0) throw DomainError("sqrt: negative input");
    }
    return unary_impl(
        a, "sqrt", [](real x) { return std::sqrt(x); },
        [](real, real o) { return real(0.5) / o; });
}

Tensor tanh(const Tensor& a) {
    return unary_impl(
        a, "tanh", [](real x) { return std::tanh(x); },
        [](real, real o) { return real(1) - o * o; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_impl(
        a, "sigmoid", [](real x) { return real(1) / (real(1) + std::exp(-x)); },
        [](real, real o) { return o * (real(1) - o); });
}

Tensor relu(const Tensor& a) {
    return unary_impl(
        a, "relu", [](real x) { return x > 0 ? x : real(0); },
        [](real x, real) { return x > 0 ? real(1) : real(0); });
}

Tensor leaky_relu(const Tensor& a, real slope) {
    return unary_impl(
        a, "leaky_relu", [slope](real x) { return x > 0 ? x : slope * x; },
        [slope](real x, real) { return x > 0 ? real(1) : slope; });
}

Tensor abs(const Tensor& a) {
    return unary_impl(
        a, "abs", [](real x) { return std::abs(x); },
        [](real x, real) { return x >= 0 ? real(1) : real(-1); });
}

Tensor square(const Tensor& a) {
    return unary_impl(
        a, "square", [](real x) { return x * x; }, [](real x, real) { return 2 * x; });
}

Tensor clamp_min(const Tensor& a, real lo) {
    return unary_impl(
        a, "clamp_min", [lo](real x) { return x < lo ? lo : x; },
        [lo](real x, real) { return x < lo ? real(0) : real(1); });
}

Tensor clamp(const Tensor& a, real lo, real hi) {
    if (lo > hi) throw ContractError("clamp: lo > hi");
    return unary_impl(
        a, "clamp", [lo, hi](real x) { return x < lo ? lo : (x > hi ? hi : x); },
        [lo, hi](real x, real) { return (x < lo || x > hi) ? real(0) : real(1); });
}

// ---- reductions -------------------------------------------------------------

Tensor sum(const Tensor& a) {
    real acc = 0;
    for (real x : a.data()) acc += x;
    Tensor ta = a;
    return make_op_result({}, {acc}, {a}, [ta](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        const real g = self.grad[0];
        for (auto& gi : ia->grad) gi += g;
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ContractError("mean: empty tensor");
    return sum(a) * (real(1) / static_cast<real>(a.numel()));
}

namespace {

// Decompose shape around `axis` as [outer, n, inner].
struct AxisSplit {
    int64_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int64_t axis) {
    AxisSplit sp;
    sp.n = s[axis];
    for (int64_t i = 0; i < axis; ++i) sp.outer *= s[i];
    for (int64_t i = axis + 1; i < static_cast<int64_t>(s.size()); ++i) sp.inner *= s[i];
    return sp;
}

Shape reduced_shape(const Shape& s, int64_t axis, bool keepdim) {
    Shape out = s;
    if (keepdim) {
        out[axis] = 1;
    } else {
        out.erase(out.begin() + axis);
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& a, int64_t axis, bool keepdim) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "sum");
    const AxisSplit sp = split_axis(a.shape(), ax);
    const auto& av = a.impl()->data;
    std::vector<real> out(sp.outer * sp.inner, real(0));
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t k = 0; k < sp.n; ++k) {
            const real* src = av.data() + (o * sp.n + k) * sp.inner;
            real* dst = out.data() + o * sp.inner;
            for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
    Tensor ta = a;
    return make_op_result(reduced_shape(a.shape(), ax, keepdim), std::move(out), {a},
                          [ta, sp](TensorImpl& self) {
                              TensorImpl* ia = ta.impl().get();
                              if (!ia->requires_grad) return;
                              ia->ensure_grad();
                              for (int64_t o = 0; o < sp.outer; ++o)
                                  for (int64_t k = 0; k < sp.n; ++k) {
                                      real* dst = ia->grad.data() + (o * sp.n + k) * sp.inner;
                                      const real* src = self.grad.data() + o * sp.inner;
                                      for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
                                  }
                          });
}

Tensor mean(const Tensor& a, int64_t axis, bool keepdim) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "mean");
    const int64_t n = a.shape()[ax];
    if (n == 0) throw ContractError("mean: empty axis");
    return sum(a, ax, keepdim) * (real(1) / static_cast<real>(n));
}

Tensor reduce_min(const Tensor& a, int64_t axis, bool keepdim) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "reduce_min");
    const AxisSplit sp = split_axis(a.shape(), ax);
    const auto& av = a.impl()->data;
    std::vector<real> out(sp.outer * sp.inner);
    auto argmin = std::make_shared<std::vector<int64_t>>(sp.outer * sp.inner);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
            real best = av[(o * sp.n) * sp.inner + i];
            int64_t bk = 0;
            for (int64_t k = 1; k < sp.n; ++k) {
                const real v = av[(o * sp.n + k) * sp.inner + i];
                if (v < best) {
                    best = v;
                    bk = k;
                }
            }
            out[o * sp.inner + i] = best;
            (*argmin)[o * sp.inner + i] = (o * sp.n + bk) * sp.inner + i;
        }
    Tensor ta = a;
    return make_op_result(reduced_shape(a.shape(), ax, keepdim), std::move(out), {a},
                          [ta, argmin](TensorImpl& self) {
                              TensorImpl* ia = ta.impl().get();
                              if (!ia->requires_grad) return;
                              ia->ensure_grad();
                              for (size_t j = 0; j < argmin->size(); ++j)
                                  ia->grad[(*argmin)[j]] += self.grad[j];
                          });
}

Tensor detached_max(const Tensor& a, int64_t axis, bool keepdim) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "detached_max");
    const AxisSplit sp = split_axis(a.shape(), ax);
    const auto& av = a.impl()->data;
    std::vector<real> out(sp.outer * sp.inner);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t i = 0; i < sp.inner; ++i) {
            real best = av[(o * sp.n) * sp.inner + i];
            for (int64_t k = 1; k < sp.n; ++k)
                best = std::max(best, av[(o * sp.n + k) * sp.inner + i]);
            out[o * sp.inner + i] = best;
        }
    return Tensor::from_data(reduced_shape(a.shape(), ax, keepdim), std::move(out));
}

Tensor softmax(const Tensor& a, int64_t axis) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "softmax");
    Tensor z = a - detached_max(a, ax, true);
    Tensor e = exp(z);
    return e / sum(e, ax, true);
}

Tensor log_softmax(const Tensor& a, int64_t axis) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "log_softmax");
    Tensor z = a - detached_max(a, ax, true);
    return z - log(sum(exp(z), ax, true));
}

// ---- shape / indexing ---------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape) {
    Shape out = shape;
    int64_t known = 1, infer = -1;
    for (size_t i = 0; i < out.size(); ++i) {
        if (out[i] == -1) {
            if (infer >= 0) throw ShapeError("reshape: more than one -1 extent");
            infer = static_cast<int64_t>(i);
        } else {
            known *= out[i];
        }
    }
    if (infer >= 0) {
        if (known == 0 || a.numel() % known != 0)
            throw ShapeError("reshape: cannot infer extent for " + shape_str(shape));
        out[infer] = a.numel() / known;
    }
    if (shape_numel(out) != a.numel())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(out) +
                         " changes element count");
    std::vector<real> data(a.data().begin(), a.data().end());
    Tensor ta = a;
    return make_op_result(out, std::move(data), {a}, [ta](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] += self.grad[i];
    });
}

Tensor transpose(const Tensor& a, int64_t axis0, int64_t axis1) {
    const int64_t r = a.ndim();
    const int64_t a0 = normalize_axis(axis0, r, "transpose");
    const int64_t a1 = normalize_axis(axis1, r, "transpose");
    Shape out = a.shape();
    std::swap(out[a0], out[a1]);
    const auto src_strides = row_major_strides(a.shape());
    auto perm_strides = src_strides;
    std::swap(perm_strides[a0], perm_strides[a1]);

    const auto& av = a.impl()->data;
    const int64_t n = a.numel();
    std::vector<real> data(n);
    auto src_index = std::make_shared<std::vector<int64_t>>(n);
    // odometer over the output shape, tracking the source offset
    std::vector<int64_t> idx(r, 0);
    int64_t off = 0;
    for (int64_t i = 0; i < n; ++i) {
        data[i] = av[off];
        (*src_index)[i] = off;
        for (int64_t ax = r - 1; ax >= 0; --ax) {
            off += perm_strides[ax];
            if (++idx[ax] < out[ax]) break;
            off -= perm_strides[ax] * out[ax];
            idx[ax] = 0;
        }
    }
    Tensor ta = a;
    return make_op_result(out, std::move(data), {a}, [ta, src_index](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            ia->grad[(*src_index)[i]] += self.grad[i];
    });
}

Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t end) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "slice");
    const int64_t n = a.shape()[ax];
    if (start < 0 || end > n || start >= end)
        throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(end) +
                         ") invalid for extent " + std::to_string(n));
    const AxisSplit sp = split_axis(a.shape(), ax);
    const int64_t m = end - start;
    Shape out = a.shape();
    out[ax] = m;
    const auto& av = a.impl()->data;
    std::vector<real> data(sp.outer * m * sp.inner);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t k = 0; k < m; ++k)
            std::copy_n(av.data() + (o * sp.n + start + k) * sp.inner, sp.inner,
                        data.data() + (o * m + k) * sp.inner);
    Tensor ta = a;
    return make_op_result(out, std::move(data), {a}, [ta, sp, m, start](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t k = 0; k < m; ++k) {
                real* dst = ia->grad.data() + (o * sp.n + start + k) * sp.inner;
                const real* src = self.grad.data() + (o * m + k) * sp.inner;
                for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
            }
    });
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    const int64_t ax = normalize_axis(axis, parts[0].ndim(), "concat");
    Shape out = parts[0].shape();
    int64_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != parts[0].ndim()) throw ShapeError("concat: rank mismatch");
        for (int64_t i = 0; i < p.ndim(); ++i)
            if (i != ax && p.shape()[i] != out[i])
                throw ShapeError("concat: extent mismatch at axis " + std::to_string(i));
        total += p.shape()[ax];
    }
    out[ax] = total;
    const AxisSplit sp = split_axis(out, ax);
    std::vector<real> data(shape_numel(out));
    int64_t at = 0;
    for (const auto& p : parts) {
        const int64_t m = p.shape()[ax];
        const auto& pv = p.impl()->data;
        for (int64_t o = 0; o < sp.outer; ++o)
            std::copy_n(pv.data() + o * m * sp.inner, m * sp.inner,
                        data.data() + (o * sp.n + at) * sp.inner);
        at += m;
    }
    std::vector<Tensor> parents = parts;
    return make_op_result(out, std::move(data), parents, [parents, sp, ax](TensorImpl& self) {
        int64_t at = 0;
        for (const auto& p : parents) {
            TensorImpl* ip = p.impl().get();
            const int64_t m = ip->shape[ax];
            if (ip->requires_grad) {
                ip->ensure_grad();
                for (int64_t o = 0; o < sp.outer; ++o) {
                    const real* src = self.grad.data() + (o * sp.n + at) * sp.inner;
                    real* dst = ip->grad.data() + o * m * sp.inner;
                    for (int64_t i = 0; i < m * sp.inner; ++i) dst[i] += src[i];
                }
            }
            at += m;
        }
    });
}

Tensor index_select(const Tensor& a, int64_t axis, const std::vector<int64_t>& indices) {
    const int64_t ax = normalize_axis(axis, a.ndim(), "index_select");
    const int64_t n = a.shape()[ax];
    for (int64_t ix : indices)
        if (ix < 0 || ix >= n)
            throw ShapeError("index_select: index " + std::to_string(ix) + " out of range");
    const AxisSplit sp = split_axis(a.shape(), ax);
    const int64_t m = static_cast<int64_t>(indices.size());
    Shape out = a.shape();
    out[ax] = m;
    const auto& av = a.impl()->data;
    std::vector<real> data(sp.outer * m * sp.inner);
    for (int64_t o = 0; o < sp.outer; ++o)
        for (int64_t k = 0; k < m; ++k)
            std::copy_n(av.data() + (o * sp.n + indices[k]) * sp.inner, sp.inner,
                        data.data() + (o * m + k) * sp.inner);
    Tensor ta = a;
    auto idx = std::make_shared<std::vector<int64_t>>(indices);
    return make_op_result(out, std::move(data), {a}, [ta, sp, idx](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        if (!ia->requires_grad) return;
        ia->ensure_grad();
        const int64_t m = static_cast<int64_t>(idx->size());
        for (int64_t o = 0; o < sp.outer; ++o)
            for (int64_t k = 0; k < m; ++k) {
                real* dst = ia->grad.data() + (o * sp.n + (*idx)[k]) * sp.inner;
                const real* src = self.grad.data() + (o * m + k) * sp.inner;
                for (int64_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
            }
    });
}

}  // namespace hazebridge
