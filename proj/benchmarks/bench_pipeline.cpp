#include <sparserl/batch_data.hpp>
#include <sparserl/fqi.hpp>
#include <sparserl/generator.hpp>
#include <sparserl/ope.hpp>

#include <benchmark/benchmark.h>

using namespace sparserl;

namespace {

SparseLinearMDP instance(Index d) {
    GeneratorSpec spec;
    spec.n_states = 20;
    spec.n_actions = 4;
    spec.d = d;
    spec.s = 3;
    spec.seed = 5;
    return generate_mdp(spec);
}

}  // namespace

static void BM_Collect(benchmark::State& state) {
    SparseLinearMDP mdp = instance(32);
    Policy pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
    InitialDistribution init = InitialDistribution::uniform(mdp.n_states());
    std::uint64_t seed = 0;
    for (auto _ : state) {
        BatchDataset data = collect(mdp, pi, init, state.range(0), 1, ++seed);
        benchmark::DoNotOptimize(data.size());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Collect)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

static void BM_LassoFqe(benchmark::State& state) {
    SparseLinearMDP mdp = instance(state.range(0));
    MdpAccess access(mdp);
    Policy pi = Policy::uniform(mdp.n_states(), mdp.n_actions());
    InitialDistribution init = InitialDistribution::uniform(mdp.n_states());
    BatchDataset data = collect(mdp, pi, init, 20000, 1, 9);
    OpeConfig oc;
    oc.iterations = 100;
    FoldSplit folds = split_folds(data, 100);
    for (auto _ : state) {
        Rng rng(1);
        OpeResult r = lasso_fqe(data, folds, access, pi, init, oc, rng);
        benchmark::DoNotOptimize(r.value);
    }
}
BENCHMARK(BM_LassoFqe)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_LassoFqi(benchmark::State& state) {
    SparseLinearMDP mdp = instance(64);
    MdpAccess access(mdp);
    BatchDataset data = collect(mdp, Policy::uniform(mdp.n_states(), mdp.n_actions()),
                                InitialDistribution::uniform(mdp.n_states()), 20000, 1, 4);
    FoldSplit folds = split_folds(data, 100);
    for (auto _ : state) {
        FqiResult r = lasso_fqi(data, folds, access);
        benchmark::DoNotOptimize(r.actions.data());
    }
}
BENCHMARK(BM_LassoFqi)->Unit(benchmark::kMillisecond);
