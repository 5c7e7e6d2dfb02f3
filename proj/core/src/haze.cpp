#include "hazebridge/haze.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hazebridge {

namespace {

void require_image(const Tensor& I, const char* op) {
    if (I.ndim() != 4) throw ShapeError(std::string(op) + ": expected [B,C,H,W] image batch");
}

Tensor broadcast_light(const Tensor& A, int64_t op_channels) {
    if (A.ndim() != 2 || A.shape()[1] != op_channels)
        throw ShapeError("atmospheric light: expected [B," + std::to_string(op_channels) + "]");
    return reshape(A, {A.shape()[0], A.shape()[1], 1, 1});
}

}  // namespace

Tensor apply_asm(const Tensor& J, const Tensor& t, const Tensor& A) {
    require_image(J, "apply_asm");
    Tensor a = broadcast_light(A, J.shape()[1]);
    Tensor hazy = J * t + a * (real(1) - t);
    return clamp(hazy, real(0), real(1));
}

Tensor dark_channel(const Tensor& I, int64_t patch) {
    require_image(I, "dark_channel");
    if (patch < 1) throw ContractError("dark_channel: patch must be >= 1");
    Tensor channel_min = reduce_min(I, 1, true);  // [B,1,H,W]
    if (patch == 1) return channel_min;
    return min_pool2d(channel_min, patch);  // rejects even windows
}

Tensor estimate_atmospheric_light(const Tensor& I, const Tensor& dark) {
    require_image(I, "estimate_atmospheric_light");
    const int64_t B = I.shape()[0], C = I.shape()[1], H = I.shape()[2], W = I.shape()[3];
    if (dark.numel() != B * H * W) throw ShapeError("estimate_atmospheric_light: dark map mismatch");
    const int64_t npix = H * W;
    const int64_t top = std::max<int64_t>(1, npix / 1000);  // brightest 0.1%

    auto iv = I.data();
    auto dv = dark.data();
    std::vector<real> out(B * C, real(0));
    std::vector<int64_t> idx(npix);
    for (int64_t b = 0; b < B; ++b) {
        std::iota(idx.begin(), idx.end(), 0);
        const real* db = dv.data() + b * npix;
        std::partial_sort(idx.begin(), idx.begin() + top, idx.end(),
                          [&](int64_t x, int64_t y) { return db[x] > db[y]; });
        for (int64_t c = 0; c < C; ++c) {
            real acc = 0;
            for (int64_t k = 0; k < top; ++k) acc += iv[(b * C + c) * npix + idx[k]];
            out[b * C + c] = acc / static_cast<real>(top);
        }
    }
    return Tensor::from_data({B, C}, std::move(out));
}

Tensor estimate_transmission(const Tensor& I, const Tensor& A, real omega, int64_t patch,
                             real t_min) {
    require_image(I, "estimate_transmission");
    for (real a : A.data())
        if (a <= 0) throw DomainError("estimate_transmission: atmospheric light must be positive");
    Tensor normalized = I / broadcast_light(A, I.shape()[1]);
    Tensor t = real(1) - omega * dark_channel(normalized, patch);
    return clamp(t, t_min, real(1));
}

DcpResult dcp_dehaze(const Tensor& I, const DcpParams& params) {
    require_image(I, "dcp_dehaze");
    NoGradGuard ng;  // estimators are measurements
    Tensor dark = dark_channel(I, params.patch);
    Tensor A = estimate_atmospheric_light(I, dark);
    Tensor t = estimate_transmission(I, A, params.omega, params.patch, params.t_min);
    Tensor a = reshape(A, {A.shape()[0], A.shape()[1], 1, 1});
    Tensor J = (I - a) / clamp_min(t, params.t_min) + a;
    DcpResult out;
    out.dehazed = clamp(J, real(0), real(1));
    out.transmission = t;
    out.atmospheric_light = A;
    return out;
}

TransmissionRefiner::TransmissionRefiner(int64_t base_channels, real t_min, Rng& rng)
    : t_min_(t_min) {
    stem_ = nn::Conv2d(1, base_channels, 3, 1, 1, rng);
    down_ = nn::Conv2d(base_channels, 2 * base_channels, 3, 2, 1, rng);
    up_ = nn::Conv2d(2 * base_channels, base_channels, 3, 1, 1, rng);
    head_ = nn::Conv2d(base_channels, 1, 3, 1, 1, rng);
}

Tensor TransmissionRefiner::forward(const Tensor& t_map) const {
    Tensor s = leaky_relu(stem_.forward(t_map));
    Tensor d = leaky_relu(down_.forward(s));
    Tensor u = leaky_relu(up_.forward(upsample_nearest2x(d)));
    Tensor logits = head_.forward(u + s);  // skip keeps fine structure
    return t_min_ + (real(1) - t_min_) * sigmoid(logits);
}

nn::ParamList TransmissionRefiner::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".stem", stem_.params(""));
    nn::append_params(out, prefix + ".down", down_.params(""));
    nn::append_params(out, prefix + ".up", up_.params(""));
    nn::append_params(out, prefix + ".head", head_.params(""));
    return out;
}

void pretrain_refiner_identity(TransmissionRefiner& refiner, int64_t steps, real lr, Rng& rng,
                               int64_t side) {
    nn::Adam opt(refiner.params("refiner"), lr);
    for (int64_t s = 0; s < steps; ++s) {
        // smooth random fields in (t_min-ish, 1], same family as real maps
        Tensor coarse = Tensor::uniform({4, 1, 4, 4}, real(0.15), real(1), rng);
        Tensor field = coarse;
        while (field.shape()[2] < side) field = upsample_nearest2x(field);
        field = slice(slice(field, 2, 0, side), 3, 0, side).detach();
        opt.zero_grad();
        Tensor loss = mean(square(refiner.forward(field) - field));
        backward(loss);
        opt.step();
    }
}

PerceptualDistance::PerceptualDistance(uint64_t seed) {
    Rng rng(seed);
    auto frozen_conv = [&](int64_t ci, int64_t co) {
        const real bound = real(1) / std::sqrt(static_cast<real>(ci * 9));
        return Tensor::uniform({co, ci, 3, 3}, -bound, bound, rng);  // requires_grad stays off
    };
    w1_ = frozen_conv(3, 12);
    w2_ = frozen_conv(12, 24);
    w3_ = frozen_conv(24, 48);
}

Tensor PerceptualDistance::operator()(const Tensor& a, const Tensor& b) const {
    auto stage = [&](const Tensor& x, const Tensor& w) {
        return relu(conv2d(x, w, Tensor(), 2, 1));
    };
    auto normalize = [&](const Tensor& f) {
        Tensor norm = sqrt(sum(square(f), 1, true) + real(1e-8));
        return f / norm;
    };
    Tensor fa = a, fb = b;
    Tensor total = Tensor::scalar(0);
    for (const Tensor* w : {&w1_, &w2_, &w3_}) {
        fa = stage(fa, *w);
        fb = stage(fb, *w);
        total = total + mean(square(normalize(fa) - normalize(fb)));
    }
    return total;
}

Tensor physical_prior_loss(const Tensor& I, const Tensor& J_gen, const Tensor& t_ref,
                           const Tensor& A, const PerceptualDistance& perceptual) {
    require_image(I, "physical_prior_loss");
    Tensor a = reshape(A, {A.shape()[0], A.shape()[1], 1, 1});
    Tensor I_phy = J_gen * t_ref + a * (real(1) - t_ref);
    return mean(abs(I - I_phy)) + perceptual(I, I_phy);
}

}  // namespace hazebridge
