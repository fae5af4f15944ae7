#include "homoglab/config.hpp"
#include "homoglab/kernels.hpp"
#include "homoglab/parallel.hpp"
#include "homoglab/solver.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

using namespace homoglab;

namespace {

// args: mesh n, realizations, p * 10
struct Fixture {
  EnergyFunctional energy;
  std::vector<double> u, grad;

  explicit Fixture(const benchmark::State& state) {
    ExperimentConfig c = parse_config("[ensemble]\ndim = 2\nseed = 9\n");
    c.integrand.p = static_cast<double>(state.range(2)) / 10.0;
    const auto N = static_cast<std::size_t>(state.range(1));
    const MediumEnsemble ens = c.ensemble();
    std::vector<WeightedMedium> media;
    for (std::size_t i = 0; i < N; ++i) media.push_back({ens.sample(i), 1.0 / static_cast<double>(N)});
    energy = assemble_energy(media, 1.0 / 16, build_mesh(2, static_cast<int>(state.range(0))), c.integrand,
                             Load{}, N > 1 ? 0.1 : 0.0, N > 1);
    u.resize(energy.num_dofs());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = std::sin(0.37 * static_cast<double>(k));
    energy.constrain(u);
    grad.resize(u.size());
  }
};

void BM_gradient_openmp(benchmark::State& state) {
  Fixture f(state);
  const kernels::ElementProblem P = f.energy.problem();
  kernels::Workspace ws;
  for (auto _ : state) benchmark::DoNotOptimize(kernels::energy_gradient(P, f.u, f.grad, ws));
  state.counters["threads"] = par::max_threads();
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.u.size()));
}

void BM_gradient_serial(benchmark::State& state) {
  Fixture f(state);
  const kernels::ElementProblem P = f.energy.problem();
  for (auto _ : state) benchmark::DoNotOptimize(kernels::serial::energy_gradient(P, f.u, f.grad));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.u.size()));
}

void shapes(benchmark::internal::Benchmark* b) {
  for (int n : {64, 128, 256})
    for (int N : {1, 4})
      for (int p : {20, 30}) b->Args({n, N, p});
}

} // namespace

BENCHMARK(BM_gradient_openmp)->Apply(shapes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_gradient_serial)->Apply(shapes)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
