#include <benchmark/benchmark.h>

#include <vector>

#include "ceg/classical.hpp"
#include "ceg/generation.hpp"
#include "ceg/kde.hpp"
#include "ceg/nets.hpp"
#include "ceg/rng.hpp"

using namespace ceg;

namespace {

void bm_generate_sequence(benchmark::State& state) {
    LoadedModel lm;
    lm.model = init_ceg_model(16, 64, 0, 1);
    gen::GenerationConfig cfg;
    cfg.horizon = static_cast<double>(state.range(0));
    cfg.seed = 2;
    std::size_t events = 0;
    for (auto _ : state) {
        const auto r = gen::generate_sequence(lm, cfg);
        events += r.sequence.size();
        benchmark::DoNotOptimize(r.sequence.events.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(events));
}

void bm_thinning_self_exciting(benchmark::State& state) {
    const classical::ClassicalModel model = classical::SelfExciting{0.1, 0.1};
    const double horizon = static_cast<double>(state.range(0));
    std::size_t events = 0;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        const EventSequence seq = classical::thinning_simulate(model, horizon, Rng(++seed));
        events += seq.size();
        benchmark::DoNotOptimize(seq.events.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(events));
}

void bm_kde_query(benchmark::State& state) {
    Rng rng(3);
    std::vector<std::vector<double>> samples;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        samples.push_back({rng.exponential(1.0), rng.normal()});
    }
    const auto cloud = kde::SampleCloud::self_tuned(samples);
    const std::vector<double> query{0.7, 0.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(kde::cond_pdf_kde(query, cloud));
    }
}

void bm_knn_bandwidths(benchmark::State& state) {
    Rng rng(5);
    std::vector<std::vector<double>> samples;
    for (std::int64_t i = 0; i < state.range(0); ++i) {
        samples.push_back({rng.exponential(1.0), rng.normal()});
    }
    const int k = static_cast<int>(std::sqrt(static_cast<double>(samples.size())));
    for (auto _ : state) {
        benchmark::DoNotOptimize(kde::knn_bandwidths(samples, k).data());
    }
}

BENCHMARK(bm_generate_sequence)->Arg(50)->Arg(200);
BENCHMARK(bm_thinning_self_exciting)->Arg(100)->Arg(400);
BENCHMARK(bm_kde_query)->Arg(100)->Arg(1000);
BENCHMARK(bm_knn_bandwidths)->Arg(100)->Arg(1000);

} // namespace

BENCHMARK_MAIN();
