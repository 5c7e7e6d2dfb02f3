#include "gemm.hpp"
#include "tensor_impl.hpp"

// matmul / bmm on top of three small GEMM kernels. Every output cell is
// accumulated by exactly one loop nest in a fixed order, so results are
// bit-identical regardless of thread count.

namespace hazebridge {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;
using detail::make_op_result;
using detail::parallel_for;
using detail::TensorImpl;

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t M = a.shape()[0], K = a.shape()[1];
    const int64_t K2 = b.shape()[0], N = b.shape()[1];
    if (K != K2)
        throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::vector<real> out(M * N, real(0));
    gemm_nn(a.data().data(), b.data().data(), out.data(), M, K, N);
    Tensor ta = a, tb = b;
    return make_op_result({M, N}, std::move(out), {a, b}, [ta, tb, M, K, N](TensorImpl& self) {
        TensorImpl* ia = ta.impl().get();
        TensorImpl* ib = tb.impl().get();
        if (ia->requires_grad) {
            ia->ensure_grad();
            gemm_nt(self.grad.data(), ib->data.data(), ia->grad.data(), M, N, K);
        }
        if (ib->requires_grad) {
            ib->ensure_grad();
            gemm_tn(ia->data.data(), self.grad.data(), ib->grad.data(), M, K, N);
        }
    });
}

// Batched matmul. Either side may be rank-2, in which case it is shared
// across the batch (weights applied per-sample).
Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.ndim() == 2 && b.ndim() == 2) return matmul(a, b);
    if ((a.ndim() != 2 && a.ndim() != 3) || (b.ndim() != 2 && b.ndim() != 3))
        throw ShapeError("bmm: expected rank 2 or 3 operands");
    const bool a_batched = a.ndim() == 3;
    const bool b_batched = b.ndim() == 3;
    const int64_t B = a_batched ? a.shape()[0] : b.shape()[0];
    if (a_batched && b_batched && a.shape()[0] != b.shape()[0])
        throw ShapeError("bmm: batch extents differ");
    const int64_t M = a.shape()[a_batched ? 1 : 0];
    const int64_t K = a.shape()[a_batched ? 2 : 1];
    const int64_t Kb = b.shape()[b_batched ? 1 : 0];
    const int64_t N = b.shape()[b_batched ? 2 : 1];
    if (K != Kb) throw ShapeError("bmm: inner extents differ");

    const real* pa = a.data().data();
    const real* pb = b.data().data();
    std::vector<real> out(B * M * N, real(0));
    real* po = out.data();
    parallel_for(B, [&](int64_t i) {
        gemm_nn(pa + (a_batched ? i * M * K : 0), pb + (b_batched ? i * K * N : 0), po + i * M * N,
                M, K, N);
    });
    Tensor ta = a, tb = b;
    return make_op_result(
        {B, M, N}, std::move(out), {a, b},
        [ta, tb, B, M, K, N, a_batched, b_batched](TensorImpl& self) {
            TensorImpl* ia = ta.impl().get();
            TensorImpl* ib = tb.impl().get();
            const real* go = self.grad.data();
            if (ia->requires_grad) {
                ia->ensure_grad();
                if (a_batched) {
                    real* ga = ia->grad.data();
                    const real* vb = ib->data.data();
                    parallel_for(B, [&](int64_t i) {
                        gemm_nt(go + i * M * N, vb + (b_batched ? i * K * N : 0), ga + i * M * K, M,
                                N, K);
                    });
                } else {
                    // shared lhs: accumulate over the batch in index order
                    for (int64_t i = 0; i < B; ++i)
                        gemm_nt(go + i * M * N, ib->data.data() + (b_batched ? i * K * N : 0),
                                ia->grad.data(), M, N, K);
                }
            }
            if (ib->requires_grad) {
                ib->ensure_grad();
                if (b_batched) {
                    real* gb = ib->grad.data();
                    const real* va = ia->data.data();
                    parallel_for(B, [&](int64_t i) {
                        gemm_tn(va + (a_batched ? i * M * K : 0), go + i * M * N, gb + i * K * N, M,
                                K, N);
                    });
                } else {
                    for (int64_t i = 0; i < B; ++i)
                        gemm_tn(ia->data.data() + (a_batched ? i * M * K : 0), go + i * M * N,
                                ib->grad.data(), M, K, N);
                }
            }
        });
}

}  // namespace hazebridge
