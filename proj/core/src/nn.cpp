#include "hazebridge/nn.hpp"

#include <cmath>

namespace hazebridge::nn {

void append_params(ParamList& dst, const std::string& prefix, const ParamList& src) {
    for (const auto& e : src) dst.push_back({prefix + "." + e.name, e.tensor});
}

int64_t param_count(const ParamList& params) {
    int64_t n = 0;
    for (const auto& e : params) n += e.tensor.numel();
    return n;
}

Linear::Linear(int64_t in, int64_t out, Rng& rng, bool zero_init) {
    const real bound = zero_init ? real(0) : real(1) / std::sqrt(static_cast<real>(in));
    weight = Tensor::uniform({in, out}, -bound, bound, rng);
    weight.set_requires_grad(true);
    bias = Tensor::zeros({out});
    bias.set_requires_grad(true);
}

Tensor Linear::forward(const Tensor& x) const {
    return matmul(x, weight) + reshape(bias, {1, bias.numel()});
}

ParamList Linear::params(const std::string& prefix) const {
    return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

Conv2d::Conv2d(int64_t ci, int64_t co, int64_t k, int64_t stride, int64_t pad, Rng& rng,
               bool zero_init)
    : stride(stride), pad(pad) {
    const real bound = zero_init ? real(0) : real(1) / std::sqrt(static_cast<real>(ci * k * k));
    weight = Tensor::uniform({co, ci, k, k}, -bound, bound, rng);
    weight.set_requires_grad(true);
    bias = Tensor::zeros({co});
    bias.set_requires_grad(true);
}

Tensor Conv2d::forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }

ParamList Conv2d::params(const std::string& prefix) const {
    return {{prefix + ".weight", weight}, {prefix + ".bias", bias}};
}

InstanceNorm2d::InstanceNorm2d(int64_t channels) {
    gamma = Tensor::ones({1, channels, 1, 1});
    gamma.set_requires_grad(true);
    beta = Tensor::zeros({1, channels, 1, 1});
    beta.set_requires_grad(true);
}

Tensor InstanceNorm2d::forward(const Tensor& x) const {
    // reduce over H and W, keep [B,C,1,1] for broadcasting
    Tensor mu = mean(mean(x, 3, true), 2, true);
    Tensor centered = x - mu;
    Tensor var = mean(mean(square(centered), 3, true), 2, true);
    return centered / sqrt(var + eps) * gamma + beta;
}

ParamList InstanceNorm2d::params(const std::string& prefix) const {
    return {{prefix + ".gamma", gamma}, {prefix + ".beta", beta}};
}

Tensor time_features(real t) {
    // frequencies 0.5, 1, 2, 4 cycles over the unit interval
    std::vector<real> v(kTimeFeatureDim);
    real freq = real(0.5);
    for (int64_t k = 0; k < kTimeFeatureDim / 2; ++k) {
        const real w = real(2.0 * 3.14159265358979323846) * freq * t;
        v[2 * k] = std::sin(w);
        v[2 * k + 1] = std::cos(w);
        freq *= 2;
    }
    return Tensor::from_data({1, kTimeFeatureDim}, std::move(v));
}

Adam::Adam(ParamList params, real lr, real beta1, real beta2, real eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        m_[i].assign(params_[i].tensor.numel(), real(0));
        v_[i].assign(params_[i].tensor.numel(), real(0));
    }
}

void Adam::zero_grad() {
    for (auto& e : params_) e.tensor.zero_grad();
}

void Adam::step() {
    ++step_count_;
    const real bc1 = real(1) - std::pow(beta1_, static_cast<real>(step_count_));
    const real bc2 = real(1) - std::pow(beta2_, static_cast<real>(step_count_));
    for (size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i].tensor;
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t j = 0; j < m.size(); ++j) {
            m[j] = beta1_ * m[j] + (real(1) - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (real(1) - beta2_) * g[j] * g[j];
            const real mh = m[j] / bc1;
            const real vh = v[j] / bc2;
            w[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

}  // namespace hazebridge::nn
