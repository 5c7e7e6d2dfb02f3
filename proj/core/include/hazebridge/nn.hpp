#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge::nn {

// Named trainable leaves, in registration order. Tensors are shared handles,
// so an optimizer and a checkpoint writer see the same storage.
struct ParamEntry {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<ParamEntry>;

void append_params(ParamList& dst, const std::string& prefix, const ParamList& src);
int64_t param_count(const ParamList& params);

struct Linear {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]

    Linear() = default;
    Linear(int64_t in, int64_t out, Rng& rng, bool zero_init = false);

    Tensor forward(const Tensor& x) const;  // [B, in] -> [B, out]
    ParamList params(const std::string& prefix) const;
};

struct Conv2d {
    Tensor weight;  // [Co, Ci, k, k]
    Tensor bias;    // [Co]
    int64_t stride = 1;
    int64_t pad = 1;

    Conv2d() = default;
    Conv2d(int64_t ci, int64_t co, int64_t k, int64_t stride, int64_t pad, Rng& rng,
           bool zero_init = false);

    Tensor forward(const Tensor& x) const;
    ParamList params(const std::string& prefix) const;
};

// Per-sample, per-channel normalization over the spatial extent, with a
// learned affine. Composed from taped ops so backward comes for free.
struct InstanceNorm2d {
    Tensor gamma;  // [1, C, 1, 1]
    Tensor beta;   // [1, C, 1, 1]
    real eps = real(1e-5);

    InstanceNorm2d() = default;
    explicit InstanceNorm2d(int64_t channels);

    Tensor forward(const Tensor& x) const;
    ParamList params(const std::string& prefix) const;
};

// Sinusoidal features of a time value in [0,1]: sin/cos at a few slow
// frequencies. Low frequencies keep the conditioning smooth between grid
// points, which is what lets one network serve every NFE.
constexpr int64_t kTimeFeatureDim = 8;
Tensor time_features(real t);  // [1, kTimeFeatureDim]

// Adam with decoupled per-parameter moments.
class Adam {
public:
    Adam() = default;
    Adam(ParamList params, real lr, real beta1 = real(0.9), real beta2 = real(0.999),
         real eps = real(1e-8));

    void zero_grad();
    void step();

    const ParamList& params() const { return params_; }
    int64_t step_count() const { return step_count_; }

    // Moment access for checkpointing.
    std::vector<std::vector<real>>& moment1() { return m_; }
    std::vector<std::vector<real>>& moment2() { return v_; }
    const std::vector<std::vector<real>>& moment1() const { return m_; }
    const std::vector<std::vector<real>>& moment2() const { return v_; }
    void set_step_count(int64_t t) { step_count_ = t; }

private:
    ParamList params_;
    real lr_ = real(1e-3), beta1_ = real(0.9), beta2_ = real(0.999), eps_ = real(1e-8);
    std::vector<std::vector<real>> m_, v_;
    int64_t step_count_ = 0;
};

}  // namespace hazebridge::nn
