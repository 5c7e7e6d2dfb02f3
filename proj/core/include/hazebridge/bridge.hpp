#pragma once

#include <functional>

#include "hazebridge/rng.hpp"
#include "hazebridge/tensor.hpp"

namespace hazebridge {

// Uniform discretization of [0,1] into n_intervals steps, plus the diffusion
// scale tau shared by every posterior below.
struct BridgeSchedule {
    int64_t n_intervals = 5;
    real tau = real(0.01);

    BridgeSchedule() = default;
    BridgeSchedule(int64_t n, real tau);

    real time_at(int64_t i) const;  // t_i = i / n, i in 0..n
    bool on_grid(real t, real tol = real(1e-9)) const;
};

// Isotropic Gaussian over a state tensor: N(mean, variance * I).
struct GaussianParams {
    Tensor mean;
    real variance = 0;
};

// Law of an intermediate state pinned at both endpoints:
// mean = t*x1 + (1-t)*x0, variance = t*(1-t)*tau.
GaussianParams bridge_posterior(const Tensor& x0, const Tensor& x1, real t, real tau);

// Same pinned law restricted to [t_a, t_b]; with s = (t-t_a)/(t_b-t_a):
// mean = s*x_b + (1-s)*x_a, variance = s*(1-s)*tau*(t_b-t_a).
GaussianParams sub_bridge_posterior(const Tensor& x_a, const Tensor& x_b, real t, real t_a,
                                    real t_b, real tau);

// One forward transition t_j -> t_j1 toward a predicted endpoint: the bridge
// restricted to [t_j, 1] evaluated at t_j1, then sampled. The draw never
// joins the autodiff graph.
Tensor markov_step(const Tensor& x_tj, const Tensor& x1_pred, real t_j, real t_j1, real tau,
                   Rng& rng);

// Endpoint predictor conditioned on the current time.
using TimedPredictor = std::function<Tensor(const Tensor& x_t, real t)>;

// Applies markov_step i times along the schedule grid, querying the
// predictor at each t_j; i = 0 returns x0 untouched.
Tensor roll_chain(const Tensor& x0, const TimedPredictor& predictor, int64_t i,
                  const BridgeSchedule& schedule, Rng& rng);

}  // namespace hazebridge
