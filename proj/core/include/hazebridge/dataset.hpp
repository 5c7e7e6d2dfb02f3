#pragma once

#include <string>
#include <vector>

#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Unpaired training pools plus (synthetic runs only) ground-truth pairs for
// held-out evaluation. Source tags record which original image each entry
// came from so the batch iterator can prove it never co-presents an aligned
// pair.
struct UnpairedDataset {
    std::vector<Tensor> hazy;   // [3,H,W] each
    std::vector<Tensor> clear;
    std::vector<int64_t> hazy_source;
    std::vector<int64_t> clear_source;
    bool unpaired_guarantee = false;

    std::vector<Tensor> test_hazy;  // aligned with test_gt
    std::vector<Tensor> test_gt;
};

// Splits the clear pool into two disjoint halves, hazes one with per-image
// atmospheric light ~ U(a range) and a smooth transmission field whose mean
// is ~ U(t range). Ground truth for the hazed half is kept as the test set.
UnpairedDataset synth_haze_dataset(const std::vector<Tensor>& clear_images, real a_min, real a_max,
                                   real t_mean_min, real t_mean_max, uint64_t seed);

// Smooth field in (0,1]: low-resolution noise upsampled bilinearly, then
// shifted to the requested mean. Exposed for tests and synthesis tools.
Tensor smooth_transmission_field(int64_t height, int64_t width, real target_mean, Rng& rng);

// Deterministic 2-D samplers; names: two-moons | ring | gaussians. [n,2].
Tensor toy2d_dataset(const std::string& name, int64_t n, uint64_t seed);

// Procedural clear images for synthetic experiments: smooth color fields
// with random dark geometric shapes (so dark-channel statistics behave like
// outdoor photos).
std::vector<Tensor> procedural_clear_images(int64_t count, int64_t size, uint64_t seed);

// Deterministic unpaired batch assembly for a given step: returns stacked
// [B,...] hazy and clear batches, never pairing an image with its own source.
struct BatchPair {
    Tensor hazy;
    Tensor clear;
};
BatchPair sample_unpaired_batch(const UnpairedDataset& data, int64_t batch, uint64_t seed,
                                uint64_t step);

// Stacks [C,H,W] tensors into [N,C,H,W] (or [d] into [N,d]).
Tensor stack(const std::vector<Tensor>& items);

}  // namespace hazebridge
