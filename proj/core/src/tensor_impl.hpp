#pragma once

#include <functional>
#include <vector>

#include "hazebridge/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hazebridge::detail {

struct TensorImpl {
    Shape shape;
    std::vector<real> data;
    bool requires_grad = false;
    std::vector<real> grad;  // sized on first accumulation

    // Tape: inputs this node was computed from, and the chain-rule step that
    // pushes this node's grad into them. Empty for leaves and no-grad results.
    std::vector<Tensor> parents;
    std::function<void(TensorImpl&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), real(0));
    }
};

// Build an op result. Taping happens only if grad mode is on and some input
// requires grad; otherwise parents/backward are dropped and the node is a
// plain value (this is what keeps no-grad rollouts off the graph).
Tensor make_op_result(Shape shape, std::vector<real> data, std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn);

void check_finite(const std::vector<real>& v, const char* op_name);

inline std::vector<int64_t> row_major_strides(const Shape& s) {
    std::vector<int64_t> st(s.size());
    int64_t acc = 1;
    for (int64_t i = static_cast<int64_t>(s.size()) - 1; i >= 0; --i) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

inline int64_t normalize_axis(int64_t axis, int64_t ndim, const char* op_name) {
    int64_t a = axis < 0 ? axis + ndim : axis;
    if (a < 0 || a >= ndim)
        throw ShapeError(std::string(op_name) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(ndim));
    return a;
}

template <typename F>
void parallel_for(int64_t n, F&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) fn(i);
#else
    for (int64_t i = 0; i < n; ++i) fn(i);
#endif
}

}  // namespace hazebridge::detail
