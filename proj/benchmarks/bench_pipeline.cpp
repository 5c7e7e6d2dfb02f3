#include <benchmark/benchmark.h>

#include "hazebridge/dataset.hpp"
#include "hazebridge/trainer.hpp"

using namespace hazebridge;

static TrainState image_state() {
    TrainerOptions opt;
    opt.seed = 9;
    auto enc = std::make_shared<const EmbeddingEncoder>(9);
    Rng rng(9);
    return TrainState::make_image(opt, enc, init_prompt(*enc, rng));
}

static void BM_GeneratorForward(benchmark::State& state) {
    TrainState s = image_state();
    Rng rng(10);
    Tensor x = Tensor::uniform({16, 3, 32, 32}, 0, 1, rng);
    NoGradGuard ng;
    for (auto _ : state) {
        Tensor y = s.generator->forward(x, real(0.4));
        benchmark::DoNotOptimize(y.data().data());
    }
}
BENCHMARK(BM_GeneratorForward);

static void BM_ImageTrainStep(benchmark::State& state) {
    TrainState s = image_state();
    auto clear = procedural_clear_images(64, 32, 11);
    auto data = synth_haze_dataset(clear, real(0.75), real(0.95), real(0.35), real(0.75), 11);
    for (auto _ : state) {
        BatchPair batch = sample_unpaired_batch(data, 16, 11, static_cast<uint64_t>(s.step));
        StepStats stats = train_step(s, batch.hazy, batch.clear);
        benchmark::DoNotOptimize(stats.total);
    }
}
BENCHMARK(BM_ImageTrainStep);

static void BM_PointTrainStep(benchmark::State& state) {
    TrainerOptions opt;
    opt.seed = 12;
    TrainState s = TrainState::make_point(opt);
    Tensor src = toy2d_dataset("two-moons", 256, 1);
    Tensor tgt = toy2d_dataset("ring", 256, 2);
    for (auto _ : state) {
        StepStats stats = train_step(s, src, tgt);
        benchmark::DoNotOptimize(stats.total);
    }
}
BENCHMARK(BM_PointTrainStep);
