// Timing of the analytic solvers and the dense simulation path.
// Build in Release; on a shared machine pass --benchmark_min_time=2 for stable numbers.

#include <benchmark/benchmark.h>

#include "freesub/freeconv.hpp"
#include "freesub/simlab.hpp"
#include "freesub/spiked.hpp"
#include "freesub/support.hpp"

namespace {

using namespace freesub;

Measure two_atoms() { return Measure::atomic({{-1.0, 0.5}, {1.0, 0.5}}); }

void BM_AdditiveSubordination(benchmark::State& state) {
    const auto mu = two_atoms();
    const auto nu = Measure::semicircle(0.5);
    for (auto _ : state) benchmark::DoNotOptimize(additive_subordination(mu, nu, {0.3, 0.01}));
}
BENCHMARK(BM_AdditiveSubordination);

void BM_SampleCovariance(benchmark::State& state) {
    const auto nu = Measure::atomic({{1.0, 0.5}, {4.0, 0.5}});
    for (auto _ : state) benchmark::DoNotOptimize(sample_cov_g(nu, 0.25, {2.0, 0.01}));
}
BENCHMARK(BM_SampleCovariance);

void BM_ConvolveDensity(benchmark::State& state) {
    const auto model = DeformedModel::additive(two_atoms(), 0.5);
    const auto grid = uniform_grid(-3.0, 3.0, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(convolve_density(model, grid));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ConvolveDensity)->Arg(501)->Arg(2001)->Unit(benchmark::kMillisecond);

void BM_SupportIntervals(benchmark::State& state) {
    std::vector<Atom> atoms;
    const auto k = static_cast<int>(state.range(0));
    for (int i = 0; i < k; ++i) atoms.push_back({4.0 * i, 1.0 / k});
    const auto model = DeformedModel::additive(Measure::atomic(atoms), 0.3);
    for (auto _ : state) benchmark::DoNotOptimize(support_intervals(model));
}
BENCHMARK(BM_SupportIntervals)->Arg(2)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_IsotropicOutliers(benchmark::State& state) {
    const auto model = DeformedModel::isotropic_additive(two_atoms(), Measure::semicircle(0.5));
    for (auto _ : state) benchmark::DoNotOptimize(isotropic_outliers(model, 10.0));
}
BENCHMARK(BM_IsotropicOutliers)->Unit(benchmark::kMillisecond);

EnsembleSpec wigner_spec(std::size_t n) {
    EnsembleSpec s;
    s.n = n;
    s.bulk.assign(n, 0.0);
    s.seed = 1;
    return s;
}

void BM_BuildWigner(benchmark::State& state) {
    const auto spec = wigner_spec(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(build_deformed(spec));
}
BENCHMARK(BM_BuildWigner)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_EigenvaluesOnly(benchmark::State& state) {
    const auto m = build_deformed(wigner_spec(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(hermitian_eigvals(m));
}
BENCHMARK(BM_EigenvaluesOnly)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_FullEigensystem(benchmark::State& state) {
    const auto m = build_deformed(wigner_spec(static_cast<std::size_t>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(hermitian_eig(m));
}
BENCHMARK(BM_FullEigensystem)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_HaarUnitary(benchmark::State& state) {
    auto rng = trial_stream(1, 0);
    for (auto _ : state) benchmark::DoNotOptimize(haar_unitary(static_cast<std::size_t>(state.range(0)), rng));
}
BENCHMARK(BM_HaarUnitary)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
