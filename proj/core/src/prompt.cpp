#include "hazebridge/prompt.hpp"

#include <algorithm>
#include <cmath>

#include "hazebridge/haze.hpp"
#include "hazebridge/nn.hpp"
#include "hazebridge/regularizers.hpp"

namespace hazebridge {

namespace {

constexpr real kProbClamp = real(1e-7);

Tensor l2_normalize_rows(const Tensor& x) {
    Tensor norm = sqrt(sum(square(x), 1, true) + real(1e-12));
    return x / norm;
}

// cosine similarity between each row of e [B,d] and the prompt vector [d]
Tensor cosine_to_prompt(const Tensor& e, const Tensor& prompt_vec) {
    Tensor p = l2_normalize_rows(reshape(prompt_vec, {1, prompt_vec.numel()}));
    return sum(l2_normalize_rows(e) * p, 1, false);  // [B]
}

// two-way softmax over the pair of cosines: [B] probabilities for the first
Tensor pair_softmax(const Tensor& cos_first, const Tensor& cos_second) {
    Tensor e1 = exp(cos_first);
    Tensor e2 = exp(cos_second);
    return e1 / (e1 + e2);
}

}  // namespace

EmbeddingEncoder::EmbeddingEncoder(uint64_t seed, int64_t dim) : dim_(dim), seed_(seed) {
    Rng rng(seed ^ 0x70726f6aULL);
    const real bound = real(1) / std::sqrt(real(kRawFeatures));
    projection_ = Tensor::uniform({kRawFeatures, dim}, -bound, bound, rng);
}

Tensor EmbeddingEncoder::raw_features(const Tensor& images) const {
    if (images.ndim() != 4 || images.shape()[1] != 3)
        throw ShapeError("EmbeddingEncoder: expected [B,3,H,W] images");
    const int64_t B = images.shape()[0];

    // channel statistics over the spatial extent
    Tensor flat = reshape(images, {B, 3, -1});
    Tensor ch_mean = mean(flat, 2, false);                          // [B,3]
    Tensor ch_var = mean(square(flat), 2, false) - square(ch_mean); // [B,3]

    // soft dark-channel histogram, 8 bins on [0,1]
    Tensor dark = dark_channel(images, 3);  // [B,1,H,W]
    const int64_t bins = 8;
    const real sigma = real(1) / real(16);
    std::vector<Tensor> bin_weights;
    for (int64_t k = 0; k < bins; ++k) {
        const real center = (static_cast<real>(k) + real(0.5)) / static_cast<real>(bins);
        Tensor d = dark - center;
        bin_weights.push_back(exp(-(d * d) / (2 * sigma * sigma)));
    }
    Tensor w = concat(bin_weights, 1);                   // [B,8,H,W]
    w = w / sum(w, 1, true);
    Tensor hist = mean(reshape(w, {B, bins, -1}), 2, false);  // [B,8]

    // gradient and contrast summaries on the channel-mean image
    Tensor gray = mean(images, 1, true);  // [B,1,H,W]
    Tensor edge = mean(reshape(sobel_magnitude(gray), {B, -1}), 1, false);  // [B]
    Tensor box = Tensor::full({1, 1, 3, 3}, real(1) / real(9));
    Tensor g_pad = pad2d(gray, 1, 1, 1, 1, PadMode::Replicate);
    Tensor local_mean = conv2d(g_pad, box, Tensor(), 1, 0);
    Tensor g2_pad = pad2d(square(gray), 1, 1, 1, 1, PadMode::Replicate);
    Tensor local_sq = conv2d(g2_pad, box, Tensor(), 1, 0);
    Tensor contrast = sqrt(clamp_min(local_sq - square(local_mean), real(0)) + real(1e-12));
    Tensor contrast_mean = mean(reshape(contrast, {B, -1}), 1, false);  // [B]

    return concat({ch_mean, ch_var, hist, reshape(edge, {B, 1}), reshape(contrast_mean, {B, 1})},
                  1);
}

Tensor EmbeddingEncoder::encode(const Tensor& images) const {
    if (!projection_.defined()) throw ContractError("EmbeddingEncoder: not initialized");
    return matmul(raw_features(images), projection_);
}

PromptState init_prompt(const EmbeddingEncoder& enc, Rng& rng) {
    PromptState s;
    s.vector = Tensor::randn({enc.dim()}, rng);
    s.vector.set_requires_grad(true);
    return s;
}

real prompt_probability(const Tensor& I, const Tensor& I_other, const PromptState& prompt,
                        const EmbeddingEncoder& enc) {
    NoGradGuard ng;
    Tensor img = I.ndim() == 3 ? reshape(I, {1, I.shape()[0], I.shape()[1], I.shape()[2]}) : I;
    Tensor oth = I_other.ndim() == 3
                     ? reshape(I_other, {1, I_other.shape()[0], I_other.shape()[1], I_other.shape()[2]})
                     : I_other;
    Tensor c1 = cosine_to_prompt(enc.encode(img), prompt.vector.detach());
    Tensor c2 = cosine_to_prompt(enc.encode(oth), prompt.vector.detach());
    return pair_softmax(c1, c2).item();
}

Tensor prompt_bce_loss(int y, const Tensor& y_hat) {
    if (y != 0 && y != 1) throw ContractError("prompt_bce_loss: label must be 0 or 1");
    Tensor p = clamp(y_hat, kProbClamp, real(1) - kProbClamp);
    if (y == 1) return -mean(log(p));
    return -mean(log(real(1) - p));
}

PromptState train_prompt(const std::vector<Tensor>& hazy_set,
                         const std::vector<Tensor>& clear_set, const EmbeddingEncoder& enc,
                         int64_t steps, real lr, uint64_t seed) {
    if (hazy_set.empty() || clear_set.empty())
        throw ContractError("train_prompt: both sets must be nonempty");

    // encoder is frozen, so embeddings are constants: compute them once
    std::vector<Tensor> e_hazy, e_clear;
    {
        NoGradGuard ng;
        for (const auto& img : hazy_set)
            e_hazy.push_back(enc.encode(reshape(img, {1, 3, img.shape()[1], img.shape()[2]})));
        for (const auto& img : clear_set)
            e_clear.push_back(enc.encode(reshape(img, {1, 3, img.shape()[1], img.shape()[2]})));
    }

    Rng init_rng = Rng::substream(seed, 0xaa);
    PromptState prompt = init_prompt(enc, init_rng);
    nn::Adam opt({{"prompt", prompt.vector}}, lr);
    real last = 0;
    for (int64_t s = 0; s < steps; ++s) {
        Rng rng = Rng::substream(seed, 1, static_cast<uint64_t>(s));
        const Tensor& eh = e_hazy[rng.uniform_int(static_cast<int64_t>(e_hazy.size()))];
        const Tensor& ec = e_clear[rng.uniform_int(static_cast<int64_t>(e_clear.size()))];
        Tensor ch = cosine_to_prompt(eh, prompt.vector);
        Tensor cc = cosine_to_prompt(ec, prompt.vector);
        Tensor y_hazy = pair_softmax(ch, cc);
        Tensor y_clear = pair_softmax(cc, ch);
        Tensor loss = prompt_bce_loss(1, y_hazy) + prompt_bce_loss(0, y_clear);
        opt.zero_grad();
        backward(loss);
        opt.step();
        last = loss.item();
    }
    prompt.steps_trained = steps;
    prompt.final_loss = last;
    return prompt;
}

real prompt_pair_accuracy(const std::vector<Tensor>& hazy_set,
                          const std::vector<Tensor>& clear_set, const PromptState& prompt,
                          const EmbeddingEncoder& enc) {
    if (hazy_set.empty() || clear_set.empty())
        throw ContractError("prompt_pair_accuracy: empty sets");
    NoGradGuard ng;
    int64_t correct = 0, total = 0;
    const int64_t n = static_cast<int64_t>(std::min(hazy_set.size(), clear_set.size()));
    for (int64_t i = 0; i < n; ++i) {
        const real y = prompt_probability(hazy_set[i], clear_set[i], prompt, enc);
        correct += (y > real(0.5)) ? 1 : 0;          // hazy classified hazy
        correct += ((real(1) - y) < real(0.5)) ? 1 : 0;  // clear classified clear
        total += 2;
    }
    return static_cast<real>(correct) / static_cast<real>(total);
}

Tensor prompt_guidance_loss(const Tensor& hazy, const Tensor& dehazed, const PromptState& prompt,
                            const EmbeddingEncoder& enc, bool both_terms) {
    Tensor e_hazy;
    {
        NoGradGuard ng;  // positives are data; gradient flows only into dehazed
        e_hazy = enc.encode(hazy);
    }
    Tensor e_dehazed = enc.encode(dehazed);
    Tensor p = prompt.vector.detach();  // frozen during bridge training
    Tensor ch = cosine_to_prompt(e_hazy, p);
    Tensor cd = cosine_to_prompt(e_dehazed, p);
    Tensor y_dehazed = pair_softmax(cd, ch);
    Tensor loss = prompt_bce_loss(0, y_dehazed);
    if (both_terms) loss = loss + prompt_bce_loss(1, pair_softmax(ch, cd));
    return loss;
}

}  // namespace hazebridge
