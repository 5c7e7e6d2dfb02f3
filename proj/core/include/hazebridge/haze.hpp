#pragma once

#include "hazebridge/nn.hpp"
#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Scattering-model state and the dark-channel estimator knobs. Transmission
// maps live in [t_min, 1]; t_min keeps the model inversion division safe.
struct AsmParams {
    Tensor atmospheric_light;  // [B, C], per channel in [0,1]
    Tensor transmission;       // [B, 1, H, W]
    real omega = real(0.95);
    int64_t patch = 15;
    real t_min = real(0.1);
};

struct DcpParams {
    real omega = real(0.95);
    int64_t patch = 15;
    real t_min = real(0.1);
};

struct DcpResult {
    Tensor dehazed;            // [B, C, H, W]
    Tensor transmission;       // [B, 1, H, W]
    Tensor atmospheric_light;  // [B, C]
};

// Scattering composition: I = J * t + A * (1 - t), clamped to [0,1].
// J [B,C,H,W], t [B,1,H,W], A [B,C].
Tensor apply_asm(const Tensor& J, const Tensor& t, const Tensor& A);

// Per-pixel min over channels, then a sliding window min (replicate edges).
Tensor dark_channel(const Tensor& I, int64_t patch);

// Mean of I over the brightest 0.1% of dark-channel pixels (at least one).
// Pure measurement; never part of the autodiff graph.
Tensor estimate_atmospheric_light(const Tensor& I, const Tensor& dark);

// t = 1 - omega * dark_channel(I / A), clamped to [t_min, 1].
Tensor estimate_transmission(const Tensor& I, const Tensor& A, real omega, int64_t patch,
                             real t_min);

// Full estimator chain plus model inversion: J = (I - A) / max(t, t_min) + A.
DcpResult dcp_dehaze(const Tensor& I, const DcpParams& params = {});

// Small encoder-decoder that refines a coarse transmission map. Output is
// squashed through a sigmoid and mapped affinely onto [t_min, 1].
class TransmissionRefiner {
public:
    TransmissionRefiner() = default;
    TransmissionRefiner(int64_t base_channels, real t_min, Rng& rng);

    Tensor forward(const Tensor& t_map) const;  // [B,1,H,W] -> [B,1,H,W]
    nn::ParamList params(const std::string& prefix) const;

private:
    nn::Conv2d stem_, down_, up_, head_;
    real t_min_ = real(0.1);
};

// Brief supervised warm-up toward the identity map on synthetic smooth
// fields, so joint training starts from t_ref ~= t.
void pretrain_refiner_identity(TransmissionRefiner& refiner, int64_t steps, real lr, Rng& rng,
                               int64_t side = 32);

// Frozen random multi-scale conv features with stage-wise normalized L2
// distance; the perceptual half of the reconstruction loss.
class PerceptualDistance {
public:
    explicit PerceptualDistance(uint64_t seed);
    Tensor operator()(const Tensor& a, const Tensor& b) const;  // scalar

private:
    Tensor w1_, w2_, w3_;  // frozen conv stacks
};

// I_phy = J_gen * t_ref + A * (1 - t_ref); returns mean L1(I, I_phy) plus the
// perceptual distance between I and I_phy.
Tensor physical_prior_loss(const Tensor& I, const Tensor& J_gen, const Tensor& t_ref,
                           const Tensor& A, const PerceptualDistance& perceptual);

}  // namespace hazebridge
