#pragma once

#include <cstdint>
#include <vector>

#include "hazebridge/common.hpp"

// Three tiny GEMM kernels, all accumulating (C +=). Inner loops run in a
// fixed order per output cell, which keeps results bit-identical for any
// thread partitioning done by the callers.

namespace hazebridge::detail {

// C += A[MxK] * B[KxN]
inline void gemm_nn(const real* A, const real* B, real* C, int64_t M, int64_t K, int64_t N) {
    for (int64_t m = 0; m < M; ++m) {
        real* c = C + m * N;
        const real* a = A + m * K;
        for (int64_t k = 0; k < K; ++k) {
            const real av = a[k];
            const real* b = B + k * N;
            for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

// C += A[MxK] * B[NxK]^T. The naive dot-product form cannot vectorize
// without reassociation, so B is transposed into scratch and the nn kernel
// runs instead; per-cell summation order (k ascending) is unchanged.
inline void gemm_nt(const real* A, const real* B, real* C, int64_t M, int64_t K, int64_t N) {
    thread_local std::vector<real> bt;
    bt.resize(K * N);
    for (int64_t n = 0; n < N; ++n)
        for (int64_t k = 0; k < K; ++k) bt[k * N + n] = B[n * K + k];
    gemm_nn(A, bt.data(), C, M, K, N);
}

// C += A[PxM]^T * B[PxN]
inline void gemm_tn(const real* A, const real* B, real* C, int64_t P, int64_t M, int64_t N) {
    for (int64_t p = 0; p < P; ++p) {
        const real* a = A + p * M;
        const real* b = B + p * N;
        for (int64_t m = 0; m < M; ++m) {
            const real av = a[m];
            real* c = C + m * N;
            for (int64_t n = 0; n < N; ++n) c[n] += av * b[n];
        }
    }
}

}  // namespace hazebridge::detail
