#pragma once

#include <memory>
#include <vector>

#include "hazebridge/bridge.hpp"
#include "hazebridge/nn.hpp"
#include "hazebridge/prompt.hpp"
#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Endpoint predictor conditioned on time. Residual by construction: with the
// head zero-initialized, forward(x, t) == x before any training step.
class Generator {
public:
    virtual ~Generator() = default;
    virtual Tensor forward(const Tensor& x, real t) const = 0;
    // Encoder activations for contrastive patch sampling; empty when the
    // architecture has no spatial encoder.
    virtual std::vector<Tensor> encode(const Tensor& x, real t) const { return {}; }
    // forward() that also hands out the encoder activations it computed.
    virtual Tensor forward_with_features(const Tensor& x, real t, std::vector<Tensor>* feats) const {
        if (feats) *feats = encode(x, t);
        return forward(x, t);
    }
    virtual std::vector<int64_t> feature_channels() const { return {}; }
    virtual nn::ParamList params(const std::string& prefix) const = 0;
};

// Training-time entry point: t must sit on the schedule grid. Inference may
// call Generator::forward with any t in [0,1].
Tensor generator_forward(const Generator& g, const Tensor& x, real t,
                         const BridgeSchedule& schedule);

struct GeneratorDesc {
    int64_t channels = 16;     // stem width; the bottleneck runs at 2x
    int64_t res_blocks = 2;
    int64_t time_hidden = 32;
};

// Residual conv encoder-decoder for small images, time injected as a
// per-channel bias in every residual block.
class ConvGenerator final : public Generator {
public:
    ConvGenerator() = default;
    ConvGenerator(const GeneratorDesc& desc, Rng& rng);

    Tensor forward(const Tensor& x, real t) const override;
    std::vector<Tensor> encode(const Tensor& x, real t) const override;
    Tensor forward_with_features(const Tensor& x, real t,
                                 std::vector<Tensor>* feats) const override;
    std::vector<int64_t> feature_channels() const override;
    nn::ParamList params(const std::string& prefix) const override;

private:
    struct ResBlock {
        nn::Conv2d conv1, conv2;
        nn::InstanceNorm2d norm1, norm2;
        nn::Linear time_bias;  // time embedding -> per-channel bias
    };

    Tensor time_embedding(real t) const;
    std::vector<Tensor> encoder_stages(const Tensor& x, real t) const;

    GeneratorDesc desc_;
    nn::Conv2d stem_, down_, up_, fuse_, head_;
    nn::InstanceNorm2d stem_norm_, down_norm_, fuse_norm_;
    nn::Linear time_l1_, time_l2_;
    std::vector<ResBlock> blocks_;
};

// Four affine layers on 2-D points, time features concatenated at the input.
class MlpGenerator final : public Generator {
public:
    MlpGenerator() = default;
    MlpGenerator(int64_t point_dim, int64_t hidden, Rng& rng);

    Tensor forward(const Tensor& x, real t) const override;
    nn::ParamList params(const std::string& prefix) const override;

private:
    nn::Linear l1_, l2_, l3_, l4_;
};

// Adversarial critic; output is a logit map of any shape (spatial for
// images, one per point for clouds).
class Discriminator {
public:
    virtual ~Discriminator() = default;
    virtual Tensor forward(const Tensor& x, real t) const = 0;
    virtual nn::ParamList params(const std::string& prefix) const = 0;
};

// Three stride-2 conv stages; a 32x32 input yields a 4x4 logit map, so every
// logit judges a local patch. Time-conditioned like the generator.
class PatchDiscriminator final : public Discriminator {
public:
    PatchDiscriminator() = default;
    PatchDiscriminator(int64_t in_channels, int64_t base, Rng& rng);

    Tensor forward(const Tensor& x, real t) const override;
    nn::ParamList params(const std::string& prefix) const override;

private:
    nn::Conv2d c1_, c2_, c3_, head_;
    nn::InstanceNorm2d n2_, n3_;
    nn::Linear time_l1_, time_bias_;
};

// Per-point logit for 2-D clouds (each point is its own patch).
class PointDiscriminator final : public Discriminator {
public:
    PointDiscriminator() = default;
    PointDiscriminator(int64_t point_dim, int64_t hidden, Rng& rng);

    Tensor forward(const Tensor& x, real t) const override;
    nn::ParamList params(const std::string& prefix) const override;

private:
    nn::Linear l1_, l2_, l3_;
};

// Whole-image critic on top of the frozen embedding encoder; only the linear
// head trains, the encoder never receives gradients.
class GlobalDiscriminator {
public:
    GlobalDiscriminator() = default;
    GlobalDiscriminator(std::shared_ptr<const EmbeddingEncoder> encoder, Rng& rng);

    Tensor forward(const Tensor& x) const;  // [B,1]
    nn::ParamList params(const std::string& prefix) const;  // head only
    const EmbeddingEncoder& encoder() const { return *encoder_; }

private:
    std::shared_ptr<const EmbeddingEncoder> encoder_;
    nn::Linear head_;
};

// Scores (state, prediction) pairs for the contrastive entropy bound. The
// pair is concatenated feature-wise; score_matrix evaluates all in-batch
// pairings at once and returns [B, B] with matched pairs on the diagonal.
class EntropyCritic {
public:
    enum class Kind { Image, Point };

    EntropyCritic() = default;
    EntropyCritic(Kind kind, int64_t channels_or_dim, int64_t hidden, Rng& rng);

    Tensor score_matrix(const Tensor& x, const Tensor& y) const;
    nn::ParamList params(const std::string& prefix) const;

private:
    Kind kind_ = Kind::Image;
    nn::Conv2d conv_;     // image pairs
    nn::Linear lin1_;     // point pairs
    nn::Linear head_;
};

}  // namespace hazebridge
