#pragma once

#include <vector>

#include "hazebridge/nn.hpp"
#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Features sampled from generator encoder activations at shared spatial
// locations: one [B, L, D] stack per encoder depth, L2-normalized, plus the
// locations they came from and the softmax temperature.
struct PatchFeatureSet {
    std::vector<Tensor> layers;                      // [B, L, D] each
    std::vector<std::vector<int64_t>> locations;     // flat h*W+w indices per layer
    real temperature = real(0.07);
};

// Two-layer projection head per encoder depth (features go through
// Linear-relu-Linear before normalization).
class PatchProjector {
public:
    PatchProjector() = default;
    PatchProjector(const std::vector<int64_t>& channels, int64_t dim, Rng& rng);

    int64_t depth_count() const { return static_cast<int64_t>(first_.size()); }
    Tensor project(int64_t depth, const Tensor& feats) const;  // [N, C] -> [N, D] normalized
    nn::ParamList params(const std::string& prefix) const;

private:
    std::vector<nn::Linear> first_, second_;
};

// Draws `count` spatial locations per layer (uniform, with replacement).
std::vector<std::vector<int64_t>> sample_feature_locations(const std::vector<Tensor>& feats,
                                                           int64_t count, Rng& rng);

// Gathers + projects activations at fixed locations.
PatchFeatureSet sample_patch_features(const std::vector<Tensor>& feats,
                                      const std::vector<std::vector<int64_t>>& locations,
                                      const PatchProjector& projector, real temperature);

// Per-location contrastive loss: each output patch is classified against the
// input patch at the same location among the other in-image locations.
Tensor patch_nce_loss(const PatchFeatureSet& feats_in, const PatchFeatureSet& feats_out);

struct HfdConfig {
    int64_t ssim_window = 7;
    real ssim_sigma = real(1.5);
    real ssim_c1 = real(0.01 * 0.01);
    real ssim_c2 = real(0.03 * 0.03);
    real weight_dft = real(1);
    real weight_ssim = real(1);
    real weight_sobel = real(1);
};

// Mean absolute difference of orthonormal 2-D DFT amplitude spectra.
Tensor dft_loss(const Tensor& a, const Tensor& b);

// Mean structural similarity (Gaussian window); ssim_loss is 1 - ssim.
Tensor ssim(const Tensor& a, const Tensor& b, const HfdConfig& cfg = {});
Tensor ssim_loss(const Tensor& a, const Tensor& b, const HfdConfig& cfg = {});

// L1 distance between 3x3 Sobel gradient-magnitude maps (replicate edges).
Tensor sobel_loss(const Tensor& a, const Tensor& b);

// Per-channel Sobel gradient magnitude map, same shape as the input.
Tensor sobel_magnitude(const Tensor& x);

// weight_dft * dft + weight_ssim * (1 - ssim) + weight_sobel * sobel
Tensor hfd_loss(const Tensor& a, const Tensor& b, const HfdConfig& cfg = {});

}  // namespace hazebridge
