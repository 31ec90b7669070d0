#include "drface/laplacian.hpp"
#include "drface/layers.hpp"
#include "drface/synth.hpp"

#include <benchmark/benchmark.h>

using namespace drface;

namespace {

struct LayerFixture {
    Eigen::SparseMatrix<double> lap;
    ChebConv conv;
    Eigen::MatrixXd input;

    explicit LayerFixture(int grid, int batch) : conv(2, 32, 32) {
        CorpusSpec spec;
        spec.grid = grid;
        spec.identities = 2;
        spec.expressions = 2;
        spec.holdout_identities = 0;
        const Corpus corpus = generate_corpus(spec);
        lap = scaled_laplacian(normalized_laplacian(corpus.base));
        Rng rng(1);
        conv.init_params(rng);
        input.resize(static_cast<long>(batch) * corpus.base.vertex_count(), 32);
        for (long i = 0; i < input.size(); ++i) {
            input.data()[i] = rng.normal();
        }
    }
};

} // namespace

static void ChebForward(benchmark::State& state) {
    LayerFixture fx(32, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        Eigen::MatrixXd y = fx.conv.forward(fx.input, fx.lap);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(ChebForward)->Arg(1)->Arg(16);

static void ChebForwardBackward(benchmark::State& state) {
    LayerFixture fx(32, static_cast<int>(state.range(0)));
    ChebGrads grads = fx.conv.zero_grads();
    for (auto _ : state) {
        ChebTape tape;
        Eigen::MatrixXd y = fx.conv.forward(fx.input, fx.lap, &tape);
        Eigen::MatrixXd dx = fx.conv.backward(tape, y, fx.lap, grads);
        benchmark::DoNotOptimize(dx.data());
    }
}
BENCHMARK(ChebForwardBackward)->Arg(1)->Arg(16);
