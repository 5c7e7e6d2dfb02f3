#include <benchmark/benchmark.h>

#include "hazebridge/tensor.hpp"

using namespace hazebridge;

static void BM_Matmul(benchmark::State& state) {
    const int64_t n = state.range(0);
    Rng rng(1);
    Tensor a = Tensor::randn({n, n}, rng);
    Tensor b = Tensor::randn({n, n}, rng);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data().data());
    }
    state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(2);
    Tensor x = Tensor::randn({16, 48, 16, 16}, rng);
    Tensor w = Tensor::randn({48, 48, 3, 3}, rng);
    Tensor bias = Tensor::randn({48}, rng);
    for (auto _ : state) {
        Tensor y = conv2d(x, w, bias, 1, 1);
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_Conv2dForward);

static void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(3);
    Tensor x = Tensor::randn({16, 48, 16, 16}, rng);
    Tensor w = Tensor::randn({48, 48, 3, 3}, rng);
    w.set_requires_grad(true);
    Tensor bias = Tensor::randn({48}, rng);
    for (auto _ : state) {
        Tensor loss = sum(square(conv2d(x, w, bias, 1, 1)));
        backward(loss);
        w.zero_grad();
        benchmark::DoNotOptimize(loss.item());
    }
}
BENCHMARK(BM_Conv2dBackward);
