#include "drface/training.hpp"

#include "drface/synth.hpp"

#include <benchmark/benchmark.h>

using namespace drface;

// One full three-stage run at reduced scale; wall-clock guide for the
// full-size training budget.
static void TrainSmall(benchmark::State& state) {
    CorpusSpec spec;
    spec.grid = static_cast<int>(state.range(0));
    spec.identities = 4;
    spec.expressions = 3;
    spec.holdout_identities = 0;
    const Corpus corpus = generate_corpus(spec);
    const ReferenceFrame ref(corpus.base);
    const TripletSets sets = build_triplets(corpus, ref);

    TrainData data;
    data.triplets = sets.train;
    data.rest_feature = ref.rest_feature().values;
    data.lap = scaled_laplacian(normalized_laplacian(corpus.base));
    data.reference_id = ref.id();
    data.vertex_count = corpus.base.vertex_count();

    TrainConfig config;
    config.epochs_per_stage = 1;
    config.batch_size = 4;
    config.latent_id = 8;
    config.latent_exp = 4;

    for (auto _ : state) {
        TrainResult result = train(config, data);
        benchmark::DoNotOptimize(result.final_eval);
    }
}
BENCHMARK(TrainSmall)->Arg(8)->Arg(16)->Unit(benchmark::kSecond);
