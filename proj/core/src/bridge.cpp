#include "hazebridge/bridge.hpp"

#include <cmath>

namespace hazebridge {

BridgeSchedule::BridgeSchedule(int64_t n, real tau) : n_intervals(n), tau(tau) {
    if (n < 1) throw ContractError("BridgeSchedule: need at least one interval");
    if (tau < 0) throw DomainError("BridgeSchedule: tau must be nonnegative");
}

real BridgeSchedule::time_at(int64_t i) const {
    if (i < 0 || i > n_intervals)
        throw ContractError("BridgeSchedule: index " + std::to_string(i) + " outside 0.." +
                            std::to_string(n_intervals));
    return static_cast<real>(i) / static_cast<real>(n_intervals);
}

bool BridgeSchedule::on_grid(real t, real tol) const {
    for (int64_t i = 0; i <= n_intervals; ++i)
        if (std::abs(t - time_at(i)) <= tol) return true;
    return false;
}

GaussianParams bridge_posterior(const Tensor& x0, const Tensor& x1, real t, real tau) {
    if (t < 0 || t > 1) throw DomainError("bridge_posterior: t outside [0,1]");
    if (x0.shape() != x1.shape())
        throw ShapeError("bridge_posterior: endpoint shapes differ, " + shape_str(x0.shape()) +
                         " vs " + shape_str(x1.shape()));
    GaussianParams g;
    g.mean = t * x1 + (real(1) - t) * x0;
    g.variance = t * (real(1) - t) * tau;
    return g;
}

GaussianParams sub_bridge_posterior(const Tensor& x_a, const Tensor& x_b, real t, real t_a,
                                    real t_b, real tau) {
    if (t_a >= t_b) throw DomainError("sub_bridge_posterior: need t_a < t_b");
    if (t < t_a || t > t_b) throw DomainError("sub_bridge_posterior: t outside [t_a, t_b]");
    if (x_a.shape() != x_b.shape())
        throw ShapeError("sub_bridge_posterior: endpoint shapes differ");
    const real s = (t - t_a) / (t_b - t_a);
    GaussianParams g;
    g.mean = s * x_b + (real(1) - s) * x_a;
    g.variance = s * (real(1) - s) * tau * (t_b - t_a);
    return g;
}

Tensor markov_step(const Tensor& x_tj, const Tensor& x1_pred, real t_j, real t_j1, real tau,
                   Rng& rng) {
    if (!(t_j < t_j1 && t_j1 <= 1))
        throw DomainError("markov_step: need t_j < t_j1 <= 1");
    NoGradGuard ng;  // transitions are data, not graph
    GaussianParams g = sub_bridge_posterior(x_tj.detach(), x1_pred.detach(), t_j1, t_j, real(1),
                                            tau);
    if (g.variance == 0) return g.mean;
    const real sigma = std::sqrt(g.variance);
    Tensor noise = Tensor::randn(g.mean.shape(), rng);
    return g.mean + sigma * noise;
}

Tensor roll_chain(const Tensor& x0, const TimedPredictor& predictor, int64_t i,
                  const BridgeSchedule& schedule, Rng& rng) {
    if (i < 0 || i > schedule.n_intervals)
        throw ContractError("roll_chain: chain length " + std::to_string(i) +
                            " outside 0.." + std::to_string(schedule.n_intervals));
    Tensor x = x0;
    for (int64_t j = 0; j < i; ++j) {
        const real t_j = schedule.time_at(j);
        Tensor x1_pred;
        {
            NoGradGuard ng;
            x1_pred = predictor(x, t_j);
        }
        x = markov_step(x, x1_pred, t_j, schedule.time_at(j + 1), schedule.tau, rng);
    }
    return x;
}

}  // namespace hazebridge
