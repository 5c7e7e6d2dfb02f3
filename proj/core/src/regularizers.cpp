#include "hazebridge/regularizers.hpp"

#include <cmath>

namespace hazebridge {

namespace {

constexpr real kPi = real(3.14159265358979323846);

// Depthwise fixed-kernel filtering: [B,C,H,W] with one [k,k] kernel applied
// per channel independently.
Tensor depthwise_fixed(const Tensor& x, const Tensor& kernel, PadMode mode) {
    const int64_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int64_t k = kernel.shape()[2];
    Tensor flat = reshape(x, {B * C, 1, H, W});
    Tensor padded = pad2d(flat, k / 2, k / 2, k / 2, k / 2, mode);
    Tensor y = conv2d(padded, kernel, Tensor(), 1, 0);
    return reshape(y, {B, C, H, W});
}

Tensor gaussian_kernel(int64_t window, real sigma) {
    std::vector<real> w(window * window);
    const int64_t r = window / 2;
    real total = 0;
    for (int64_t y = 0; y < window; ++y)
        for (int64_t x = 0; x < window; ++x) {
            const real dy = static_cast<real>(y - r), dx = static_cast<real>(x - r);
            w[y * window + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            total += w[y * window + x];
        }
    for (auto& v : w) v /= total;
    return Tensor::from_data({1, 1, window, window}, std::move(w));
}

void require_same_images(const Tensor& a, const Tensor& b, const char* op) {
    if (a.ndim() != 4 || b.ndim() != 4 || a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": expected matching [B,C,H,W] inputs, got " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Orthonormal DFT basis matrices: cos and sin of 2*pi*u*m/N, scaled 1/sqrt(N).
// Both are symmetric, so left and right application share one matrix.
std::pair<Tensor, Tensor> dft_basis(int64_t n) {
    std::vector<real> c(n * n), s(n * n);
    const real scale = real(1) / std::sqrt(static_cast<real>(n));
    for (int64_t u = 0; u < n; ++u)
        for (int64_t m = 0; m < n; ++m) {
            const real w = 2 * kPi * static_cast<real>(u) * static_cast<real>(m) /
                           static_cast<real>(n);
            c[u * n + m] = std::cos(w) * scale;
            s[u * n + m] = std::sin(w) * scale;
        }
    return {Tensor::from_data({n, n}, std::move(c)), Tensor::from_data({n, n}, std::move(s))};
}

}  // namespace

PatchProjector::PatchProjector(const std::vector<int64_t>& channels, int64_t dim, Rng& rng) {
    for (int64_t c : channels) {
        first_.emplace_back(c, dim, rng);
        second_.emplace_back(dim, dim, rng);
    }
}

Tensor PatchProjector::project(int64_t depth, const Tensor& feats) const {
    Tensor h = second_[depth].forward(relu(first_[depth].forward(feats)));
    Tensor norm = sqrt(sum(square(h), 1, true) + real(1e-10));
    return h / norm;
}

nn::ParamList PatchProjector::params(const std::string& prefix) const {
    nn::ParamList out;
    for (size_t d = 0; d < first_.size(); ++d) {
        nn::append_params(out, prefix + ".l1_" + std::to_string(d), first_[d].params(""));
        nn::append_params(out, prefix + ".l2_" + std::to_string(d), second_[d].params(""));
    }
    return out;
}

std::vector<std::vector<int64_t>> sample_feature_locations(const std::vector<Tensor>& feats,
                                                           int64_t count, Rng& rng) {
    std::vector<std::vector<int64_t>> locations;
    for (const auto& f : feats) {
        const int64_t spatial = f.shape()[2] * f.shape()[3];
        std::vector<int64_t> locs(count);
        for (auto& l : locs) l = rng.uniform_int(spatial);
        locations.push_back(std::move(locs));
    }
    return locations;
}

PatchFeatureSet sample_patch_features(const std::vector<Tensor>& feats,
                                      const std::vector<std::vector<int64_t>>& locations,
                                      const PatchProjector& projector, real temperature) {
    if (feats.size() != locations.size())
        throw ContractError("sample_patch_features: layer/location count mismatch");
    PatchFeatureSet set;
    set.locations = locations;
    set.temperature = temperature;
    for (size_t d = 0; d < feats.size(); ++d) {
        const Tensor& f = feats[d];
        const int64_t B = f.shape()[0], C = f.shape()[1];
        const int64_t L = static_cast<int64_t>(locations[d].size());
        // [B,C,H,W] -> [B,C,HW] -> gather L -> [B,L,C]
        Tensor flat = reshape(f, {B, C, -1});
        Tensor picked = transpose(index_select(flat, 2, locations[d]), 1, 2);
        Tensor projected = projector.project(static_cast<int64_t>(d),
                                             reshape(picked, {B * L, C}));
        set.layers.push_back(reshape(projected, {B, L, projected.shape()[1]}));
    }
    return set;
}

Tensor patch_nce_loss(const PatchFeatureSet& feats_in, const PatchFeatureSet& feats_out) {
    if (feats_in.layers.size() != feats_out.layers.size() ||
        feats_in.locations != feats_out.locations)
        throw ContractError("patch_nce_loss: feature sets disagree on layers or locations");
    if (feats_in.layers.empty()) throw ContractError("patch_nce_loss: empty feature sets");

    Tensor total = Tensor::scalar(0);
    for (size_t d = 0; d < feats_in.layers.size(); ++d) {
        const Tensor& keys = feats_in.layers[d];     // positives come from the input
        const Tensor& queries = feats_out.layers[d]; // queries from the output
        if (keys.shape() != queries.shape())
            throw ContractError("patch_nce_loss: layer shape mismatch");
        const int64_t B = keys.shape()[0], L = keys.shape()[1];
        Tensor logits = bmm(queries, transpose(keys, 1, 2)) *
                        (real(1) / feats_in.temperature);     // [B,L,L]
        Tensor logp = log_softmax(logits, 2);
        // diagonal: each query scored against its own location
        std::vector<int64_t> diag(L);
        for (int64_t i = 0; i < L; ++i) diag[i] = i * L + i;
        Tensor own = index_select(reshape(logp, {B, L * L}), 1, diag);
        total = total - mean(own);
    }
    return total / static_cast<real>(feats_in.layers.size());
}

Tensor dft_loss(const Tensor& a, const Tensor& b) {
    require_same_images(a, b, "dft_loss");
    const int64_t B = a.shape()[0], C = a.shape()[1], H = a.shape()[2], W = a.shape()[3];
    auto [ch, sh] = dft_basis(H);
    auto [cw, sw] = dft_basis(W);
    auto amplitude = [&](const Tensor& x) {
        Tensor flat = reshape(x, {B * C, H, W});
        Tensor cx = bmm(ch, flat);  // [BC,H,W]
        Tensor sx = bmm(sh, flat);
        Tensor re = bmm(cx, cw) - bmm(sx, sw);
        Tensor im = bmm(cx, sw) + bmm(sx, cw);
        return sqrt(square(re) + square(im) + real(1e-12));
    };
    return mean(abs(amplitude(a) - amplitude(b)));
}

Tensor ssim(const Tensor& a, const Tensor& b, const HfdConfig& cfg) {
    require_same_images(a, b, "ssim");
    if (cfg.ssim_window % 2 == 0 || cfg.ssim_window < 1)
        throw ContractError("ssim: window must be odd");
    if (cfg.ssim_c1 <= 0 || cfg.ssim_c2 <= 0) throw ContractError("ssim: constants must be positive");
    Tensor kernel = gaussian_kernel(cfg.ssim_window, cfg.ssim_sigma);
    auto smooth = [&](const Tensor& x) { return depthwise_fixed(x, kernel, PadMode::Replicate); };
    Tensor mu_a = smooth(a);
    Tensor mu_b = smooth(b);
    Tensor var_a = smooth(square(a)) - square(mu_a);
    Tensor var_b = smooth(square(b)) - square(mu_b);
    Tensor cov = smooth(a * b) - mu_a * mu_b;
    Tensor num = (2 * mu_a * mu_b + cfg.ssim_c1) * (2 * cov + cfg.ssim_c2);
    Tensor den = (square(mu_a) + square(mu_b) + cfg.ssim_c1) * (var_a + var_b + cfg.ssim_c2);
    return mean(num / den);
}

Tensor ssim_loss(const Tensor& a, const Tensor& b, const HfdConfig& cfg) {
    return real(1) - ssim(a, b, cfg);
}

Tensor sobel_magnitude(const Tensor& x) {
    static const std::vector<real> gx = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const std::vector<real> gy = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Tensor kx = Tensor::from_data({1, 1, 3, 3}, gx);
    Tensor ky = Tensor::from_data({1, 1, 3, 3}, gy);
    Tensor dx = depthwise_fixed(x, kx, PadMode::Replicate);
    Tensor dy = depthwise_fixed(x, ky, PadMode::Replicate);
    return sqrt(square(dx) + square(dy) + real(1e-12));
}

Tensor sobel_loss(const Tensor& a, const Tensor& b) {
    require_same_images(a, b, "sobel_loss");
    return mean(abs(sobel_magnitude(a) - sobel_magnitude(b)));
}

Tensor hfd_loss(const Tensor& a, const Tensor& b, const HfdConfig& cfg) {
    require_same_images(a, b, "hfd_loss");
    Tensor total = Tensor::scalar(0);
    if (cfg.weight_dft != 0) total = total + cfg.weight_dft * dft_loss(a, b);
    if (cfg.weight_ssim != 0) total = total + cfg.weight_ssim * ssim_loss(a, b, cfg);
    if (cfg.weight_sobel != 0) total = total + cfg.weight_sobel * sobel_loss(a, b);
    return total;
}

}  // namespace hazebridge
