#include "hazebridge/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "hazebridge/haze.hpp"

namespace hazebridge {

namespace {

constexpr real kPi = real(3.14159265358979323846);

Tensor bilinear_upsample(const Tensor& low, int64_t H, int64_t W) {
    // low: [C,h,w]; align-corners mapping
    const int64_t C = low.shape()[0], h = low.shape()[1], w = low.shape()[2];
    auto lv = low.data();
    std::vector<real> out(C * H * W);
    for (int64_t c = 0; c < C; ++c)
        for (int64_t y = 0; y < H; ++y) {
            const real sy = H > 1 ? static_cast<real>(y) * (h - 1) / (H - 1) : 0;
            const int64_t y0 = static_cast<int64_t>(sy);
            const int64_t y1 = std::min(y0 + 1, h - 1);
            const real fy = sy - static_cast<real>(y0);
            for (int64_t x = 0; x < W; ++x) {
                const real sx = W > 1 ? static_cast<real>(x) * (w - 1) / (W - 1) : 0;
                const int64_t x0 = static_cast<int64_t>(sx);
                const int64_t x1 = std::min(x0 + 1, w - 1);
                const real fx = sx - static_cast<real>(x0);
                const real v00 = lv[(c * h + y0) * w + x0];
                const real v01 = lv[(c * h + y0) * w + x1];
                const real v10 = lv[(c * h + y1) * w + x0];
                const real v11 = lv[(c * h + y1) * w + x1];
                out[(c * H + y) * W + x] = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                           fy * ((1 - fx) * v10 + fx * v11);
            }
        }
    return Tensor::from_data({C, H, W}, std::move(out));
}

}  // namespace

Tensor stack(const std::vector<Tensor>& items) {
    if (items.empty()) throw ContractError("stack: no tensors");
    std::vector<Tensor> expanded;
    for (const auto& t : items) {
        Shape s = t.shape();
        s.insert(s.begin(), 1);
        expanded.push_back(reshape(t, s));
    }
    return concat(expanded, 0);
}

Tensor smooth_transmission_field(int64_t height, int64_t width, real target_mean, Rng& rng) {
    if (target_mean <= 0 || target_mean > 1)
        throw ConfigError("smooth_transmission_field: target mean outside (0,1]");
    Tensor low = Tensor::uniform({1, 4, 4}, real(0), real(1), rng);
    Tensor up = bilinear_upsample(low, height, width);
    real m = 0;
    for (real v : up.data()) m += v;
    m /= static_cast<real>(up.numel());
    // amplitude shrinks toward the ends of (0,1] so the field stays in range
    // without clamping; target 1 degenerates to the no-haze field exactly
    const real amp = real(0.7) * std::max(real(0), std::min(target_mean - real(0.05),
                                                            real(1) - target_mean));
    std::vector<real> out(up.numel());
    auto uv = up.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = target_mean + amp * (uv[i] - m);
    return Tensor::from_data({1, height, width}, std::move(out));
}

UnpairedDataset synth_haze_dataset(const std::vector<Tensor>& clear_images, real a_min, real a_max,
                                   real t_mean_min, real t_mean_max, uint64_t seed) {
    auto in_unit = [](real v) { return v > 0 && v <= 1; };
    if (!in_unit(a_min) || !in_unit(a_max) || a_min > a_max)
        throw ConfigError("synth_haze_dataset: atmospheric light range outside (0,1]");
    if (!in_unit(t_mean_min) || !in_unit(t_mean_max) || t_mean_min > t_mean_max)
        throw ConfigError("synth_haze_dataset: transmission range outside (0,1]");
    const int64_t n = static_cast<int64_t>(clear_images.size());
    if (n < 4) throw ContractError("synth_haze_dataset: need at least 4 clear images");

    Rng split_rng = Rng::substream(seed, 0x5d);
    auto perm = split_rng.permutation(n);
    const int64_t half = n / 2;

    UnpairedDataset out;
    out.unpaired_guarantee = true;
    for (int64_t k = 0; k < half; ++k) {
        const int64_t src = perm[k];
        const Tensor& J = clear_images[src];
        const int64_t H = J.shape()[1], W = J.shape()[2];
        Rng rng = Rng::substream(seed, 0x4a, static_cast<uint64_t>(k));
        const real a = rng.uniform(a_min, a_max);
        const real tm = rng.uniform(t_mean_min, t_mean_max);
        Tensor t_field = smooth_transmission_field(H, W, tm, rng);
        Tensor hazy = apply_asm(reshape(J, {1, 3, H, W}), reshape(t_field, {1, 1, H, W}),
                                Tensor::from_data({1, 3}, {a, a, a}));
        Tensor hazy_img = reshape(hazy, {3, H, W});
        out.hazy.push_back(hazy_img);
        out.hazy_source.push_back(src);
        out.test_hazy.push_back(hazy_img);
        out.test_gt.push_back(J);
    }
    for (int64_t k = half; k < n; ++k) {
        out.clear.push_back(clear_images[perm[k]]);
        out.clear_source.push_back(perm[k]);
    }
    return out;
}

Tensor toy2d_dataset(const std::string& name, int64_t n, uint64_t seed) {
    if (n < 100) throw ContractError("toy2d_dataset: need n >= 100");
    Rng rng = Rng::substream(seed, 0x2d);
    std::vector<real> pts(2 * n);
    if (name == "two-moons") {
        for (int64_t i = 0; i < n; ++i) {
            const real theta = rng.uniform(real(0), kPi);
            real x, y;
            if (i % 2 == 0) {
                x = std::cos(theta);
                y = std::sin(theta);
            } else {
                x = real(1) - std::cos(theta);
                y = real(0.5) - std::sin(theta);
            }
            pts[2 * i] = x - real(0.5) + real(0.03) * rng.normal();
            pts[2 * i + 1] = y - real(0.25) + real(0.03) * rng.normal();
        }
    } else if (name == "ring") {
        for (int64_t i = 0; i < n; ++i) {
            const real theta = rng.uniform(real(0), 2 * kPi);
            const real r = real(1) + real(0.05) * rng.normal();
            pts[2 * i] = r * std::cos(theta);
            pts[2 * i + 1] = r * std::sin(theta);
        }
    } else if (name == "gaussians") {
        const int64_t modes = 8;
        for (int64_t i = 0; i < n; ++i) {
            const int64_t k = rng.uniform_int(modes);
            const real cx = std::cos(2 * kPi * static_cast<real>(k) / modes);
            const real cy = std::sin(2 * kPi * static_cast<real>(k) / modes);
            pts[2 * i] = cx + real(0.08) * rng.normal();
            pts[2 * i + 1] = cy + real(0.08) * rng.normal();
        }
    } else {
        throw ConfigError("toy2d_dataset: unknown distribution '" + name + "'");
    }
    return Tensor::from_data({n, 2}, std::move(pts));
}

std::vector<Tensor> procedural_clear_images(int64_t count, int64_t size, uint64_t seed) {
    std::vector<Tensor> images;
    images.reserve(count);
    for (int64_t k = 0; k < count; ++k) {
        Rng rng = Rng::substream(seed, 0xc1ea2, static_cast<uint64_t>(k));
        // smooth colored background
        Tensor low = Tensor::uniform({3, 4, 4}, real(0.3), real(0.95), rng);
        Tensor bg = bilinear_upsample(low, size, size);
        std::vector<real> img(bg.data().begin(), bg.data().end());
        // a few shapes, most of them dark so local windows keep a dark pixel
        const int64_t shapes = 3 + rng.uniform_int(4);
        for (int64_t s = 0; s < shapes; ++s) {
            const bool dark = rng.uniform() < real(0.75);
            real color[3];
            for (auto& c : color)
                c = dark ? rng.uniform(real(0), real(0.15)) : rng.uniform(real(0.6), real(1));
            if (dark) color[rng.uniform_int(3)] = rng.uniform(real(0), real(0.05));
            const bool circle = rng.uniform() < real(0.5);
            const int64_t cx = rng.uniform_int(size), cy = rng.uniform_int(size);
            const int64_t r = 2 + rng.uniform_int(size / 4);
            for (int64_t y = std::max<int64_t>(0, cy - r); y < std::min(size, cy + r + 1); ++y)
                for (int64_t x = std::max<int64_t>(0, cx - r); x < std::min(size, cx + r + 1); ++x) {
                    if (circle && (x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
                    for (int64_t c = 0; c < 3; ++c) img[(c * size + y) * size + x] = color[c];
                }
        }
        // mild texture
        for (auto& v : img) {
            v += real(0.02) * rng.normal();
            v = std::min(real(1), std::max(real(0), v));
        }
        images.push_back(Tensor::from_data({3, size, size}, std::move(img)));
    }
    return images;
}

BatchPair sample_unpaired_batch(const UnpairedDataset& data, int64_t batch, uint64_t seed,
                                uint64_t step) {
    if (data.hazy.empty() || data.clear.empty())
        throw ContractError("sample_unpaired_batch: empty pools");
    Rng rng = Rng::substream(seed, step, 0xba7c);
    std::vector<Tensor> hazy, clear;
    std::vector<int64_t> hazy_src;
    for (int64_t b = 0; b < batch; ++b) {
        const int64_t ih = rng.uniform_int(static_cast<int64_t>(data.hazy.size()));
        hazy.push_back(data.hazy[ih]);
        hazy_src.push_back(data.hazy_source.empty() ? -1 : data.hazy_source[ih]);
    }
    for (int64_t b = 0; b < batch; ++b) {
        int64_t ic = rng.uniform_int(static_cast<int64_t>(data.clear.size()));
        // never co-present an image with its own clear source
        for (int attempts = 0; attempts < 64; ++attempts) {
            const int64_t src = data.clear_source.empty() ? -2 : data.clear_source[ic];
            bool aligned = false;
            for (int64_t h : hazy_src)
                if (h >= 0 && h == src) aligned = true;
            if (!aligned) break;
            ic = rng.uniform_int(static_cast<int64_t>(data.clear.size()));
        }
        clear.push_back(data.clear[ic]);
    }
    return {stack(hazy), stack(clear)};
}

}  // namespace hazebridge
