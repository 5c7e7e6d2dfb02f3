#include <algorithm>
#include <cmath>

#include "gemm.hpp"
#include "tensor_impl.hpp"

// NCHW image ops: padding, im2col/col2im, a fused conv2d, sliding-window min
// and nearest-neighbour upsampling. conv2d does not keep its im2col buffer on
// the tape; the backward pass rebuilds it, trading a little compute for a
// much smaller live graph.

namespace hazebridge {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;
using detail::make_op_result;
using detail::parallel_for;
using detail::TensorImpl;

namespace {

void require_rank4(const Tensor& x, const char* op) {
    if (x.ndim() != 4) throw ShapeError(std::string(op) + ": expected NCHW input, got " +
                                        shape_str(x.shape()));
}

void im2col_plane(const real* x, real* col, int64_t C, int64_t H, int64_t W, int64_t kh,
                  int64_t kw, int64_t stride, int64_t pad, int64_t Ho, int64_t Wo) {
    for (int64_t c = 0; c < C; ++c)
        for (int64_t ki = 0; ki < kh; ++ki)
            for (int64_t kj = 0; kj < kw; ++kj) {
                real* dst = col + ((c * kh + ki) * kw + kj) * Ho * Wo;
                for (int64_t oy = 0; oy < Ho; ++oy) {
                    const int64_t iy = oy * stride - pad + ki;
                    for (int64_t ox = 0; ox < Wo; ++ox) {
                        const int64_t ix = ox * stride - pad + kj;
                        const bool in = iy >= 0 && iy < H && ix >= 0 && ix < W;
                        dst[oy * Wo + ox] = in ? x[(c * H + iy) * W + ix] : real(0);
                    }
                }
            }
}

void col2im_plane(const real* col, real* x, int64_t C, int64_t H, int64_t W, int64_t kh,
                  int64_t kw, int64_t stride, int64_t pad, int64_t Ho, int64_t Wo) {
    for (int64_t c = 0; c < C; ++c)
        for (int64_t ki = 0; ki < kh; ++ki)
            for (int64_t kj = 0; kj < kw; ++kj) {
                const real* src = col + ((c * kh + ki) * kw + kj) * Ho * Wo;
                for (int64_t oy = 0; oy < Ho; ++oy) {
                    const int64_t iy = oy * stride - pad + ki;
                    if (iy < 0 || iy >= H) continue;
                    for (int64_t ox = 0; ox < Wo; ++ox) {
                        const int64_t ix = ox * stride - pad + kj;
                        if (ix < 0 || ix >= W) continue;
                        x[(c * H + iy) * W + ix] += src[oy * Wo + ox];
                    }
                }
            }
}
}  // namespace

Tensor pad2d(const Tensor& x, int64_t top, int64_t bottom, int64_t left, int64_t right,
             PadMode mode) {
    require_rank4(x, "pad2d");
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        throw ContractError("pad2d: negative padding");
    const int64_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t Ho = H + top + bottom, Wo = W + left + right;
    const auto& xv = x.impl()->data;
    std::vector<real> out(B * C * Ho * Wo, real(0));
    parallel_for(B * C, [&](int64_t p) {
        const real* src = xv.data() + p * H * W;
        real* dst = out.data() + p * Ho * Wo;
        for (int64_t y = 0; y < Ho; ++y)
            for (int64_t xk = 0; xk < Wo; ++xk) {
                int64_t sy = y - top, sx = xk - left;
                if (mode == PadMode::Replicate) {
                    sy = std::clamp<int64_t>(sy, 0, H - 1);
                    sx = std::clamp<int64_t>(sx, 0, W - 1);
                } else if (sy < 0 || sy >= H || sx < 0 || sx >= W) {
                    continue;
                }
                dst[y * Wo + xk] = src[sy * W + sx];
            }
    });
    Tensor tx = x;
    return make_op_result({B, C, Ho, Wo}, std::move(out), {x},
                          [tx, B, C, H, W, Ho, Wo, top, left, mode](TensorImpl& self) {
                              TensorImpl* ix = tx.impl().get();
                              if (!ix->requires_grad) return;
                              ix->ensure_grad();
                              const real* go = self.grad.data();
                              real* gx = ix->grad.data();
                              parallel_for(B * C, [&](int64_t p) {
                                  const real* src = go + p * Ho * Wo;
                                  real* dst = gx + p * H * W;
                                  for (int64_t y = 0; y < Ho; ++y)
                                      for (int64_t xk = 0; xk < Wo; ++xk) {
                                          int64_t sy = y - top, sx = xk - left;
                                          if (mode == PadMode::Replicate) {
                                              sy = std::clamp<int64_t>(sy, 0, H - 1);
                                              sx = std::clamp<int64_t>(sx, 0, W - 1);
                                          } else if (sy < 0 || sy >= H || sx < 0 || sx >= W) {
                                              continue;
                                          }
                                          dst[sy * W + sx] += src[y * Wo + xk];
                                      }
                              });
                          });
}

namespace detail {

Tensor im2col(const Tensor& x, int64_t kh, int64_t kw, int64_t stride, int64_t pad) {
    require_rank4(x, "im2col");
    const int64_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("im2col: kernel larger than padded input");
    const int64_t K = C * kh * kw, No = Ho * Wo;
    const auto& xv = x.impl()->data;
    std::vector<real> out(B * K * No);
    parallel_for(B, [&](int64_t b) {
        im2col_plane(xv.data() + b * C * H * W, out.data() + b * K * No, C, H, W, kh, kw, stride,
                     pad, Ho, Wo);
    });
    Tensor tx = x;
    return make_op_result({B, K, No}, std::move(out), {x},
                          [tx, B, C, H, W, kh, kw, stride, pad, Ho, Wo](TensorImpl& self) {
                              TensorImpl* ix = tx.impl().get();
                              if (!ix->requires_grad) return;
                              ix->ensure_grad();
                              const int64_t K = C * kh * kw, No = Ho * Wo;
                              const real* go = self.grad.data();
                              real* gx = ix->grad.data();
                              parallel_for(B, [&](int64_t b) {
                                  col2im_plane(go + b * K * No, gx + b * C * H * W, C, H, W, kh,
                                               kw, stride, pad, Ho, Wo);
                              });
                          });
}

}  // namespace detail

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int64_t stride, int64_t pad) {
    require_rank4(x, "conv2d");
    if (w.ndim() != 4) throw ShapeError("conv2d: expected [Co,Ci,kh,kw] weights");
    const int64_t B = x.shape()[0], Ci = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t Co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != Ci)
        throw ShapeError("conv2d: input channels " + std::to_string(Ci) + " vs weight " +
                         std::to_string(w.shape()[1]));
    if (bias.defined() && bias.numel() != Co) throw ShapeError("conv2d: bias length != Co");
    const int64_t Ho = (H + 2 * pad - kh) / stride + 1;
    const int64_t Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
    const int64_t K = Ci * kh * kw, No = Ho * Wo;

    const auto& xv = x.impl()->data;
    const auto& wv = w.impl()->data;
    std::vector<real> out(B * Co * No, real(0));
    parallel_for(B, [&](int64_t b) {
        thread_local std::vector<real> col;
        col.resize(K * No);
        im2col_plane(xv.data() + b * Ci * H * W, col.data(), Ci, H, W, kh, kw, stride, pad, Ho,
                     Wo);
        gemm_nn(wv.data(), col.data(), out.data() + b * Co * No, Co, K, No);
    });
    if (bias.defined()) {
        const auto& bv = bias.impl()->data;
        for (int64_t b = 0; b < B; ++b)
            for (int64_t co = 0; co < Co; ++co) {
                real* dst = out.data() + (b * Co + co) * No;
                const real bval = bv[co];
                for (int64_t i = 0; i < No; ++i) dst[i] += bval;
            }
    }

    std::vector<Tensor> parents = {x, w};
    if (bias.defined()) parents.push_back(bias);
    Tensor tx = x, tw = w, tb = bias;
    return make_op_result(
        {B, Co, Ho, Wo}, std::move(out), parents,
        [tx, tw, tb, B, Ci, H, W, Co, kh, kw, stride, pad, Ho, Wo](TensorImpl& self) {
            const int64_t K = Ci * kh * kw, No = Ho * Wo;
            TensorImpl* ix = tx.impl().get();
            TensorImpl* iw = tw.impl().get();
            const real* go = self.grad.data();

            if (tb.defined() && tb.impl()->requires_grad) {
                TensorImpl* ib = tb.impl().get();
                ib->ensure_grad();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Co; ++co) {
                        const real* src = go + (b * Co + co) * No;
                        real acc = 0;
                        for (int64_t i = 0; i < No; ++i) acc += src[i];
                        ib->grad[co] += acc;
                    }
            }

            const bool want_x = ix->requires_grad;
            const bool want_w = iw->requires_grad;
            if (!want_x && !want_w) return;
            if (want_x) ix->ensure_grad();
            if (want_w) iw->ensure_grad();

            // Per-sample partial weight grads, reduced in index order below.
            std::vector<real> wpart;
            if (want_w) wpart.assign(B * Co * K, real(0));
            const real* xv = ix->data.data();
            const real* wv = iw->data.data();
            real* gx = want_x ? ix->grad.data() : nullptr;
            parallel_for(B, [&](int64_t b) {
                thread_local std::vector<real> col, dcol;
                col.resize(K * No);
                im2col_plane(xv + b * Ci * H * W, col.data(), Ci, H, W, kh, kw, stride, pad, Ho,
                             Wo);
                if (want_w)
                    gemm_nt(go + b * Co * No, col.data(), wpart.data() + b * Co * K, Co, No, K);
                if (want_x) {
                    dcol.assign(K * No, real(0));
                    gemm_tn(wv, go + b * Co * No, dcol.data(), Co, K, No);
                    col2im_plane(dcol.data(), gx + b * Ci * H * W, Ci, H, W, kh, kw, stride, pad,
                                 Ho, Wo);
                }
            });
            if (want_w) {
                real* gw = iw->grad.data();
                for (int64_t b = 0; b < B; ++b) {
                    const real* src = wpart.data() + b * Co * K;
                    for (int64_t i = 0; i < Co * K; ++i) gw[i] += src[i];
                }
            }
        });
}

Tensor min_pool2d(const Tensor& x, int64_t window) {
    require_rank4(x, "min_pool2d");
    if (window < 1 || window % 2 == 0)
        throw ContractError("min_pool2d: window must be odd and positive, got " +
                            std::to_string(window));
    const int64_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t r = window / 2;
    const auto& xv = x.impl()->data;
    std::vector<real> out(B * C * H * W);
    auto argmin = std::make_shared<std::vector<int64_t>>(B * C * H * W);
    parallel_for(B * C, [&](int64_t p) {
        const real* src = xv.data() + p * H * W;
        real* dst = out.data() + p * H * W;
        int64_t* am = argmin->data() + p * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t xk = 0; xk < W; ++xk) {
                real best = src[std::clamp<int64_t>(y - r, 0, H - 1) * W +
                                std::clamp<int64_t>(xk - r, 0, W - 1)];
                int64_t barg = std::clamp<int64_t>(y - r, 0, H - 1) * W +
                               std::clamp<int64_t>(xk - r, 0, W - 1);
                for (int64_t dy = -r; dy <= r; ++dy) {
                    const int64_t sy = std::clamp<int64_t>(y + dy, 0, H - 1);
                    for (int64_t dx = -r; dx <= r; ++dx) {
                        const int64_t sx = std::clamp<int64_t>(xk + dx, 0, W - 1);
                        const real v = src[sy * W + sx];
                        if (v < best) {
                            best = v;
                            barg = sy * W + sx;
                        }
                    }
                }
                dst[y * W + xk] = best;
                am[y * W + xk] = p * H * W + barg;
            }
    });
    Tensor tx = x;
    return make_op_result(x.shape(), std::move(out), {x}, [tx, argmin](TensorImpl& self) {
        TensorImpl* ix = tx.impl().get();
        if (!ix->requires_grad) return;
        ix->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ix->grad[(*argmin)[i]] += self.grad[i];
    });
}

Tensor upsample_nearest2x(const Tensor& x) {
    require_rank4(x, "upsample_nearest2x");
    const int64_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const auto& xv = x.impl()->data;
    std::vector<real> out(B * C * 4 * H * W);
    parallel_for(B * C, [&](int64_t p) {
        const real* src = xv.data() + p * H * W;
        real* dst = out.data() + p * 4 * H * W;
        for (int64_t y = 0; y < 2 * H; ++y)
            for (int64_t xk = 0; xk < 2 * W; ++xk) dst[y * 2 * W + xk] = src[(y / 2) * W + xk / 2];
    });
    Tensor tx = x;
    return make_op_result({B, C, 2 * H, 2 * W}, std::move(out), {x},
                          [tx, B, C, H, W](TensorImpl& self) {
                              TensorImpl* ix = tx.impl().get();
                              if (!ix->requires_grad) return;
                              ix->ensure_grad();
                              const real* go = self.grad.data();
                              real* gx = ix->grad.data();
                              parallel_for(B * C, [&](int64_t p) {
                                  const real* src = go + p * 4 * H * W;
                                  real* dst = gx + p * H * W;
                                  for (int64_t y = 0; y < 2 * H; ++y)
                                      for (int64_t xk = 0; xk < 2 * W; ++xk)
                                          dst[(y / 2) * W + xk / 2] += src[y * 2 * W + xk];
                              });
                          });
}

}  // namespace hazebridge
