#include <benchmark/benchmark.h>

#include "hazebridge/bridge.hpp"
#include "hazebridge/sinkhorn.hpp"

using namespace hazebridge;

static void BM_ChainRoll(benchmark::State& state) {
    BridgeSchedule sched(5, 0.01);
    Rng init(4);
    Tensor x0 = Tensor::randn({16, 3, 32, 32}, init);
    Tensor x1 = Tensor::randn({16, 3, 32, 32}, init);
    TimedPredictor ideal = [&](const Tensor&, real) { return x1; };
    uint64_t k = 0;
    for (auto _ : state) {
        Rng rng = Rng::substream(7, k++);
        Tensor xt = roll_chain(x0, ideal, sched.n_intervals, sched, rng);
        benchmark::DoNotOptimize(xt.data().data());
    }
}
BENCHMARK(BM_ChainRoll);

static void BM_SinkhornSmallEps(benchmark::State& state) {
    const int64_t n = state.range(0);
    Rng rng(5);
    std::vector<real> cost(n * n);
    for (auto& c : cost) c = rng.uniform(0, 1);
    std::vector<real> marg(n, real(1) / n);
    for (auto _ : state) {
        auto plan = sinkhorn(cost, n, n, marg, marg, real(1e-2), 100000, real(1e-8));
        benchmark::DoNotOptimize(plan.matrix.data());
    }
}
BENCHMARK(BM_SinkhornSmallEps)->Arg(8)->Arg(32);
