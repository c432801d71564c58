#include <sparserl/rng.hpp>
#include <sparserl/solvers.hpp>

#include <benchmark/benchmark.h>

using namespace sparserl;

namespace {

GramStats random_problem(Index n, Index p, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = rng.normal();
    Eigen::VectorXd y = x.leftCols(std::min<Index>(p, 5)).rowwise().sum();
    for (Index i = 0; i < n; ++i) y(i) += 0.3 * rng.normal();
    return GramStats::from(x, y);
}

}  // namespace

static void BM_Lasso(benchmark::State& state) {
    const Index p = state.range(0);
    GramStats st = random_problem(2000, p, 1);
    const double lam = 0.05 * st.cross.cwiseAbs().maxCoeff();
    for (auto _ : state) {
        LassoResult r = lasso(st, lam);
        benchmark::DoNotOptimize(r.w.data());
    }
}
BENCHMARK(BM_Lasso)->Arg(32)->Arg(128)->Arg(512);

static void BM_GroupLasso(benchmark::State& state) {
    const Index d = state.range(0);
    Rng rng(2);
    Eigen::MatrixXd x(4000, d), y(4000, d);
    for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
    y = x.leftCols(4) * Eigen::MatrixXd::Constant(4, d, 0.25);
    Eigen::MatrixXd gram = x.transpose() * x / 4000.0;
    Eigen::MatrixXd cross = x.transpose() * y / 4000.0;
    for (auto _ : state) {
        GroupLassoResult r = group_lasso_embedding(gram, cross, 1e-3);
        benchmark::DoNotOptimize(r.k.data());
    }
}
BENCHMARK(BM_GroupLasso)->Arg(16)->Arg(64)->Arg(128);

static void BM_RestrictedEigenvalue(benchmark::State& state) {
    Rng rng(3);
    const Index d = 12;
    Eigen::MatrixXd b(d, 3 * d);
    for (Index i = 0; i < b.rows(); ++i)
        for (Index j = 0; j < b.cols(); ++j) b(i, j) = rng.normal();
    Eigen::MatrixXd z = b * b.transpose() / static_cast<double>(b.cols());
    for (auto _ : state) {
        RestrictedEigenvalue re = restricted_eigenvalue(z, state.range(0));
        benchmark::DoNotOptimize(re.upper);
    }
}
BENCHMARK(BM_RestrictedEigenvalue)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
