#pragma once

#include <cstdint>
#include <vector>

#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Frozen image embedder: hand-built statistics (channel moments, a soft
// dark-channel histogram, edge and contrast summaries) followed by a fixed
// random projection. Deterministic, differentiable with respect to the
// image, and never trained. An external pre-trained encoder can stand in by
// implementing the same encode() signature.
class EmbeddingEncoder {
public:
    static constexpr int64_t kRawFeatures = 16;

    EmbeddingEncoder() = default;
    EmbeddingEncoder(uint64_t seed, int64_t dim = 32);

    int64_t dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

    // [B,3,H,W] -> [B,dim]; taped w.r.t. the images, parameters frozen.
    Tensor encode(const Tensor& images) const;

    // Pre-projection statistics, exposed for inspection/tests: [B,16] laid
    // out as channel means (3), channel variances (3), dark-channel
    // histogram (8), Sobel-magnitude mean (1), local-contrast mean (1).
    Tensor raw_features(const Tensor& images) const;

private:
    Tensor projection_;  // [16, dim], frozen
    int64_t dim_ = 32;
    uint64_t seed_ = 0;
};

// Learnable haze marker living directly in embedding space. Cosine
// proximity to it flags an image as hazy.
struct PromptState {
    Tensor vector;  // [dim]
    int64_t steps_trained = 0;
    real final_loss = 0;
};

PromptState init_prompt(const EmbeddingEncoder& enc, Rng& rng);

// Two-way softmax over cosine similarities: probability that I is the hazy
// one of the pair (I, I_other).
real prompt_probability(const Tensor& I, const Tensor& I_other, const PromptState& prompt,
                        const EmbeddingEncoder& enc);

// -(y log y_hat + (1-y) log(1-y_hat)); y_hat clamped away from {0,1}.
Tensor prompt_bce_loss(int y, const Tensor& y_hat);

// Optimizes only the prompt vector: one (hazy, clear) pair per step, hazy
// labelled 1, clear labelled 0. Embeddings are precomputed; the encoder
// never changes.
PromptState train_prompt(const std::vector<Tensor>& hazy_set,
                         const std::vector<Tensor>& clear_set, const EmbeddingEncoder& enc,
                         int64_t steps, real lr, uint64_t seed);

// Fraction of (hazy, clear) pairings classified correctly both ways.
real prompt_pair_accuracy(const std::vector<Tensor>& hazy_set,
                          const std::vector<Tensor>& clear_set, const PromptState& prompt,
                          const EmbeddingEncoder& enc);

// Guidance loss for bridge training: hazy is the positive, the generated
// dehazed batch the negative. Gradient reaches only the dehazed images; the
// prompt and the hazy-side embeddings are constants here. With both_terms
// the two labels are summed, otherwise only the dehazed term is kept.
Tensor prompt_guidance_loss(const Tensor& hazy, const Tensor& dehazed, const PromptState& prompt,
                            const EmbeddingEncoder& enc, bool both_terms = true);

}  // namespace hazebridge
