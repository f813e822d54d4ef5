#include <random>

#include <benchmark/benchmark.h>

#include "lvfuse/kernels.hpp"
#include "lvfuse/rouge.hpp"

using namespace lvfuse;

namespace {

Tensor2D random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(-1, 1);
    Tensor2D t(rows, cols);
    for (float& v : t.data()) v = u(gen);
    return t;
}

void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = random_tensor(n, n, 1), b = random_tensor(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bm_matmul)->Arg(32)->Arg(64)->Arg(128);

void bm_attention(benchmark::State& state) {
    const auto seq = static_cast<std::size_t>(state.range(0));
    const auto q = random_tensor(seq, 64, 1), k = random_tensor(seq, 64, 2), v = random_tensor(seq, 64, 3);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::causal_attention(q, k, v, 0.125f));
}
BENCHMARK(bm_attention)->Arg(16)->Arg(64)->Arg(256);

void bm_rouge(benchmark::State& state) {
    std::string a, b;
    for (int i = 0; i < state.range(0); ++i) {
        a += "word" + std::to_string(i % 13) + " ";
        b += "word" + std::to_string(i % 7) + " ";
    }
    for (auto _ : state) benchmark::DoNotOptimize(eval::rouge_l(a, {b}));
}
BENCHMARK(bm_rouge)->Arg(20)->Arg(200);

}  // namespace

BENCHMARK_MAIN();
