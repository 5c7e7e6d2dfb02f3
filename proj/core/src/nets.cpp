#include "hazebridge/nets.hpp"

#include <cmath>

namespace hazebridge {

Tensor generator_forward(const Generator& g, const Tensor& x, real t,
                         const BridgeSchedule& schedule) {
    if (!schedule.on_grid(t))
        throw ContractError("generator_forward: training-time t=" + std::to_string(t) +
                            " is not a schedule grid point");
    return g.forward(x, t);
}

// ---- ConvGenerator ----------------------------------------------------------

ConvGenerator::ConvGenerator(const GeneratorDesc& desc, Rng& rng) : desc_(desc) {
    const int64_t c = desc.channels;
    stem_ = nn::Conv2d(3, c, 3, 1, 1, rng);
    stem_norm_ = nn::InstanceNorm2d(c);
    down_ = nn::Conv2d(c, 2 * c, 3, 2, 1, rng);
    down_norm_ = nn::InstanceNorm2d(2 * c);
    up_ = nn::Conv2d(2 * c, c, 3, 1, 1, rng);
    fuse_ = nn::Conv2d(c, c, 3, 1, 1, rng);
    fuse_norm_ = nn::InstanceNorm2d(c);
    head_ = nn::Conv2d(c, 3, 3, 1, 1, rng, /*zero_init=*/true);
    time_l1_ = nn::Linear(nn::kTimeFeatureDim, desc.time_hidden, rng);
    time_l2_ = nn::Linear(desc.time_hidden, desc.time_hidden, rng);
    for (int64_t i = 0; i < desc.res_blocks; ++i) {
        ResBlock b;
        b.conv1 = nn::Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
        b.conv2 = nn::Conv2d(2 * c, 2 * c, 3, 1, 1, rng);
        b.norm1 = nn::InstanceNorm2d(2 * c);
        b.norm2 = nn::InstanceNorm2d(2 * c);
        b.time_bias = nn::Linear(desc.time_hidden, 2 * c, rng);
        blocks_.push_back(std::move(b));
    }
}

Tensor ConvGenerator::time_embedding(real t) const {
    return tanh(time_l2_.forward(tanh(time_l1_.forward(nn::time_features(t)))));
}

std::vector<Tensor> ConvGenerator::encoder_stages(const Tensor& x, real t) const {
    Tensor temb = time_embedding(t);  // [1, hidden]
    Tensor s = leaky_relu(stem_norm_.forward(stem_.forward(x)));
    Tensor d = leaky_relu(down_norm_.forward(down_.forward(s)));
    Tensor h = d;
    for (const auto& b : blocks_) {
        Tensor bias = b.time_bias.forward(temb);  // [1, 2c]
        bias = reshape(bias, {1, bias.numel(), 1, 1});
        Tensor r = leaky_relu(b.norm1.forward(b.conv1.forward(h) + bias));
        r = b.norm2.forward(b.conv2.forward(r));
        h = leaky_relu(h + r);
    }
    return {s, d, h};
}

Tensor ConvGenerator::forward(const Tensor& x, real t) const {
    return forward_with_features(x, t, nullptr);
}

Tensor ConvGenerator::forward_with_features(const Tensor& x, real t,
                                            std::vector<Tensor>* feats) const {
    auto stages = encoder_stages(x, t);
    if (feats) *feats = stages;
    Tensor u = upsample_nearest2x(up_.forward(stages[2]));
    Tensor f = leaky_relu(fuse_norm_.forward(fuse_.forward(u + stages[0])));
    return x + head_.forward(f);
}

std::vector<Tensor> ConvGenerator::encode(const Tensor& x, real t) const {
    return encoder_stages(x, t);
}

std::vector<int64_t> ConvGenerator::feature_channels() const {
    return {desc_.channels, 2 * desc_.channels, 2 * desc_.channels};
}

nn::ParamList ConvGenerator::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".stem", stem_.params(""));
    nn::append_params(out, prefix + ".stem_norm", stem_norm_.params(""));
    nn::append_params(out, prefix + ".down", down_.params(""));
    nn::append_params(out, prefix + ".down_norm", down_norm_.params(""));
    for (size_t i = 0; i < blocks_.size(); ++i) {
        const std::string p = prefix + ".block" + std::to_string(i);
        nn::append_params(out, p + ".conv1", blocks_[i].conv1.params(""));
        nn::append_params(out, p + ".norm1", blocks_[i].norm1.params(""));
        nn::append_params(out, p + ".conv2", blocks_[i].conv2.params(""));
        nn::append_params(out, p + ".norm2", blocks_[i].norm2.params(""));
        nn::append_params(out, p + ".time_bias", blocks_[i].time_bias.params(""));
    }
    nn::append_params(out, prefix + ".up", up_.params(""));
    nn::append_params(out, prefix + ".fuse", fuse_.params(""));
    nn::append_params(out, prefix + ".fuse_norm", fuse_norm_.params(""));
    nn::append_params(out, prefix + ".head", head_.params(""));
    nn::append_params(out, prefix + ".time_l1", time_l1_.params(""));
    nn::append_params(out, prefix + ".time_l2", time_l2_.params(""));
    return out;
}

// ---- MlpGenerator -------------------------------------------------------------

MlpGenerator::MlpGenerator(int64_t point_dim, int64_t hidden, Rng& rng) {
    l1_ = nn::Linear(point_dim + nn::kTimeFeatureDim, hidden, rng);
    l2_ = nn::Linear(hidden, hidden, rng);
    l3_ = nn::Linear(hidden, hidden, rng);
    l4_ = nn::Linear(hidden, point_dim, rng, /*zero_init=*/true);
}

Tensor MlpGenerator::forward(const Tensor& x, real t) const {
    const int64_t B = x.shape()[0];
    Tensor temb = nn::time_features(t);
    Tensor tiled = index_select(temb, 0, std::vector<int64_t>(B, 0));
    Tensor h = concat({x, tiled}, 1);
    h = leaky_relu(l1_.forward(h));
    h = leaky_relu(l2_.forward(h));
    h = leaky_relu(l3_.forward(h));
    return x + l4_.forward(h);
}

nn::ParamList MlpGenerator::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".l1", l1_.params(""));
    nn::append_params(out, prefix + ".l2", l2_.params(""));
    nn::append_params(out, prefix + ".l3", l3_.params(""));
    nn::append_params(out, prefix + ".l4", l4_.params(""));
    return out;
}

// ---- discriminators ----------------------------------------------------------

PatchDiscriminator::PatchDiscriminator(int64_t in_channels, int64_t base, Rng& rng) {
    c1_ = nn::Conv2d(in_channels, base, 3, 2, 1, rng);
    c2_ = nn::Conv2d(base, 2 * base, 3, 2, 1, rng);
    n2_ = nn::InstanceNorm2d(2 * base);
    c3_ = nn::Conv2d(2 * base, 2 * base, 3, 2, 1, rng);
    n3_ = nn::InstanceNorm2d(2 * base);
    head_ = nn::Conv2d(2 * base, 1, 1, 1, 0, rng);
    time_l1_ = nn::Linear(nn::kTimeFeatureDim, base, rng);
    time_bias_ = nn::Linear(base, base, rng);
}

Tensor PatchDiscriminator::forward(const Tensor& x, real t) const {
    Tensor temb = time_bias_.forward(tanh(time_l1_.forward(nn::time_features(t))));
    temb = reshape(temb, {1, temb.numel(), 1, 1});
    Tensor h = leaky_relu(c1_.forward(x) + temb);
    h = leaky_relu(n2_.forward(c2_.forward(h)));
    h = leaky_relu(n3_.forward(c3_.forward(h)));
    return head_.forward(h);  // [B,1,h',w']
}

nn::ParamList PatchDiscriminator::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".c1", c1_.params(""));
    nn::append_params(out, prefix + ".c2", c2_.params(""));
    nn::append_params(out, prefix + ".n2", n2_.params(""));
    nn::append_params(out, prefix + ".c3", c3_.params(""));
    nn::append_params(out, prefix + ".n3", n3_.params(""));
    nn::append_params(out, prefix + ".head", head_.params(""));
    nn::append_params(out, prefix + ".time_l1", time_l1_.params(""));
    nn::append_params(out, prefix + ".time_bias", time_bias_.params(""));
    return out;
}

PointDiscriminator::PointDiscriminator(int64_t point_dim, int64_t hidden, Rng& rng) {
    l1_ = nn::Linear(point_dim + nn::kTimeFeatureDim, hidden, rng);
    l2_ = nn::Linear(hidden, hidden, rng);
    l3_ = nn::Linear(hidden, 1, rng);
}

Tensor PointDiscriminator::forward(const Tensor& x, real t) const {
    const int64_t B = x.shape()[0];
    Tensor temb = nn::time_features(t);
    Tensor tiled = index_select(temb, 0, std::vector<int64_t>(B, 0));
    Tensor h = leaky_relu(l1_.forward(concat({x, tiled}, 1)));
    h = leaky_relu(l2_.forward(h));
    return l3_.forward(h);  // [B,1]
}

nn::ParamList PointDiscriminator::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".l1", l1_.params(""));
    nn::append_params(out, prefix + ".l2", l2_.params(""));
    nn::append_params(out, prefix + ".l3", l3_.params(""));
    return out;
}

GlobalDiscriminator::GlobalDiscriminator(std::shared_ptr<const EmbeddingEncoder> encoder,
                                         Rng& rng)
    : encoder_(std::move(encoder)) {
    head_ = nn::Linear(encoder_->dim(), 1, rng);
}

Tensor GlobalDiscriminator::forward(const Tensor& x) const {
    return head_.forward(encoder_->encode(x));
}

nn::ParamList GlobalDiscriminator::params(const std::string& prefix) const {
    nn::ParamList out;
    nn::append_params(out, prefix + ".head", head_.params(""));
    return out;
}

// ---- entropy critic ------------------------------------------------------------

EntropyCritic::EntropyCritic(Kind kind, int64_t channels_or_dim, int64_t hidden, Rng& rng)
    : kind_(kind) {
    if (kind == Kind::Image) {
        conv_ = nn::Conv2d(2 * channels_or_dim, hidden, 3, 2, 1, rng);
        head_ = nn::Linear(hidden, 1, rng);
    } else {
        lin1_ = nn::Linear(2 * channels_or_dim, hidden, rng);
        head_ = nn::Linear(hidden, 1, rng);
    }
}

Tensor EntropyCritic::score_matrix(const Tensor& x, const Tensor& y) const {
    if (x.shape() != y.shape()) throw ShapeError("EntropyCritic: pair shapes differ");
    const int64_t B = x.shape()[0];
    if (B < 2) throw ContractError("EntropyCritic: batch must have at least 2 samples");

    // all B*B pairings: x repeated blockwise, y tiled
    std::vector<int64_t> rep(B * B), tile(B * B);
    for (int64_t i = 0; i < B; ++i)
        for (int64_t j = 0; j < B; ++j) {
            rep[i * B + j] = i;
            tile[i * B + j] = j;
        }
    Tensor xs = index_select(x, 0, rep);
    Tensor ys = index_select(y, 0, tile);
    Tensor pair = concat({xs, ys}, 1);

    Tensor score;
    if (kind_ == Kind::Image) {
        Tensor h = leaky_relu(conv_.forward(pair));
        h = mean(mean(h, 3, false), 2, false);  // global average -> [B*B, hidden]
        score = head_.forward(h);
    } else {
        score = head_.forward(leaky_relu(lin1_.forward(pair)));
    }
    return reshape(score, {B, B});
}

nn::ParamList EntropyCritic::params(const std::string& prefix) const {
    nn::ParamList out;
    if (kind_ == Kind::Image) {
        nn::append_params(out, prefix + ".conv", conv_.params(""));
    } else {
        nn::append_params(out, prefix + ".lin1", lin1_.params(""));
    }
    nn::append_params(out, prefix + ".head", head_.params(""));
    return out;
}

}  // namespace hazebridge
