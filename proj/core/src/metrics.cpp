#include "hazebridge/metrics.hpp"

#include <cmath>

namespace hazebridge {

real psnr(const Tensor& a, const Tensor& b, bool* exact_match) {
    if (a.shape() != b.shape())
        throw ShapeError("psnr: shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    auto av = a.data();
    auto bv = b.data();
    real mse = 0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        const real d = av[i] - bv[i];
        mse += d * d;
    }
    mse /= static_cast<real>(a.numel());
    if (exact_match) *exact_match = (mse == 0);
    if (mse == 0) return kPsnrSentinel;
    return 10 * std::log10(real(1) / mse);
}

real ssim_metric(const Tensor& a, const Tensor& b) {
    NoGradGuard ng;
    Tensor ta = a.ndim() == 3 ? reshape(a, {1, a.shape()[0], a.shape()[1], a.shape()[2]}) : a;
    Tensor tb = b.ndim() == 3 ? reshape(b, {1, b.shape()[0], b.shape()[1], b.shape()[2]}) : b;
    return ssim(ta, tb).item();
}

real energy_distance(const Tensor& xs, const Tensor& ys) {
    if (xs.ndim() != 2 || ys.ndim() != 2 || xs.shape()[1] != ys.shape()[1])
        throw ShapeError("energy_distance: expected [n,d] and [m,d] with matching d");
    const int64_t n = xs.shape()[0], m = ys.shape()[0], d = xs.shape()[1];
    auto xv = xs.data();
    auto yv = ys.data();
    auto pair_mean = [&](std::span<const real> a, int64_t na, std::span<const real> b,
                         int64_t nb) {
        real acc = 0;
        for (int64_t i = 0; i < na; ++i)
            for (int64_t j = 0; j < nb; ++j) {
                real s = 0;
                for (int64_t k = 0; k < d; ++k) {
                    const real diff = a[i * d + k] - b[j * d + k];
                    s += diff * diff;
                }
                acc += std::sqrt(s);
            }
        return acc / static_cast<real>(na * nb);
    };
    return 2 * pair_mean(xv, n, yv, m) - pair_mean(xv, n, xv, n) - pair_mean(yv, m, yv, m);
}

}  // namespace hazebridge
