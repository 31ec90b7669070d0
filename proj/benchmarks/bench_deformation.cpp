#include "drface/synth.hpp"

#include <benchmark/benchmark.h>

using namespace drface;

namespace {

const Corpus& bench_corpus(int grid) {
    static std::map<int, Corpus> cache;
    auto it = cache.find(grid);
    if (it == cache.end()) {
        CorpusSpec spec;
        spec.grid = grid;
        spec.identities = 2;
        spec.expressions = 2;
        spec.holdout_identities = 0;
        it = cache.emplace(grid, generate_corpus(spec)).first;
    }
    return it->second;
}

} // namespace

static void DREncode(benchmark::State& state) {
    const Corpus& corpus = bench_corpus(static_cast<int>(state.range(0)));
    const ReferenceFrame ref(corpus.base);
    for (auto _ : state) {
        DRFeature f = ref.encode(corpus.meshes[1][1]);
        benchmark::DoNotOptimize(f.values.data());
    }
    state.SetComplexityN(corpus.base.vertex_count());
}
BENCHMARK(DREncode)->Arg(16)->Arg(32)->Arg(48)->Complexity();

static void DRDecode(benchmark::State& state) {
    const Corpus& corpus = bench_corpus(static_cast<int>(state.range(0)));
    const ReferenceFrame ref(corpus.base);
    const DRFeature f = ref.encode(corpus.meshes[1][1]);
    for (auto _ : state) {
        Mesh m = ref.decode(f);
        benchmark::DoNotOptimize(m.vertices().data());
    }
    state.SetComplexityN(corpus.base.vertex_count());
}
BENCHMARK(DRDecode)->Arg(16)->Arg(32)->Arg(48)->Complexity();

static void ReferenceFactorization(benchmark::State& state) {
    const Corpus& corpus = bench_corpus(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        ReferenceFrame ref(corpus.base);
        benchmark::DoNotOptimize(&ref);
    }
    state.SetComplexityN(corpus.base.vertex_count());
}
BENCHMARK(ReferenceFactorization)->Arg(16)->Arg(32)->Complexity();
