#include <benchmark/benchmark.h>

#include "lvfuse/decoder.hpp"
#include "lvfuse/fusion.hpp"

using namespace lvfuse;

namespace {

const TokenSequence kPrompt{87, 104, 97, 116, 32, 99, 111, 108, 111, 117, 114, 32, 105, 115, 32, 105, 116, 63};

void bm_forward(benchmark::State& state) {
    const auto stack = seed_init(StackDims{4, static_cast<std::uint32_t>(state.range(0)), 256, 1}, 42);
    for (auto _ : state) benchmark::DoNotOptimize(forward_full(stack, kPrompt));
}
BENCHMARK(bm_forward)->Arg(64)->Arg(128);

void bm_single_decode(benchmark::State& state) {
    const auto stack = seed_init(StackDims{4, 64, 256, 1}, 42);
    for (auto _ : state) benchmark::DoNotOptimize(greedy_decode(stack, kPrompt, 16, std::nullopt));
}
BENCHMARK(bm_single_decode)->Unit(benchmark::kMillisecond);

void bm_fused_decode(benchmark::State& state) {
    const auto llm = seed_init(StackDims{4, 64, 256, 1}, 42);
    const auto lvlm = seed_init(StackDims{4, 64, 256, 1}, 43);
    FusionConfig c;
    c.merge_layers = {2, 3, -1};
    c.merge_mode = state.range(0) ? MergeMode::broadcast : MergeMode::pairwise;
    c.max_new_tokens = 16;
    for (auto _ : state) benchmark::DoNotOptimize(fused_decode(llm, lvlm, kPrompt, kPrompt, c));
}
BENCHMARK(bm_fused_decode)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
