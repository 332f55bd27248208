#include <benchmark/benchmark.h>

#include "nirvar/cluster.hpp"
#include "nirvar/dgp.hpp"
#include "nirvar/graph.hpp"
#include "nirvar/pipeline.hpp"
#include "nirvar/restricted_var.hpp"
#include "nirvar/spectral.hpp"

using namespace nirvar;

namespace {

struct Fixture {
  dgp::CoefficientStack coeffs;
  dgp::PanelTensor panel;
  graph::CommunityAssignment z;
};

Fixture make(int n, int k, int t) {
  Rng r(42);
  Fixture f;
  f.z = graph::contiguous_communities(n, k);
  const std::vector<graph::AdjacencyStack> per{
      graph::AdjacencyStack({graph::sample_adjacency(graph::BlockModel::planted(k, 1.0, 0.0), f.z, r)})};
  f.coeffs = dgp::build_coefficients(per, dgp::Uniform01{}, 0.9, r);
  f.panel = dgp::simulate(f.coeffs, {}, t, 200, r);
  return f;
}

void BM_Simulate(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)), 5, 10);
  Rng r(1);
  for (auto _ : state) benchmark::DoNotOptimize(dgp::simulate(f.coeffs, {}, 1000, 200, r));
}
BENCHMARK(BM_Simulate)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Uase(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)), 5, 1000);
  const auto stack = spectral::covariance_stack(spectral::demean(f.panel), spectral::Mode::Covariance);
  for (auto _ : state) benchmark::DoNotOptimize(spectral::uase(stack, 5));
}
BENCHMARK(BM_Uase)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Gmm(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng r(3);
  Matrix x(n, 5);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = r.normal() + 4.0 * (i % 5 == j);
  for (auto _ : state) {
    Rng g(4);
    benchmark::DoNotOptimize(cluster::gmm_fit(x, 5, g));
  }
}
BENCHMARK(BM_Gmm)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Estimate(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)), 5, 1000);
  const var::RestrictionSet rs(graph::clique_stack(std::vector{f.z}));
  for (auto _ : state) benchmark::DoNotOptimize(var::estimate(f.panel, 0, rs));
}
BENCHMARK(BM_Estimate)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_FullPipeline(benchmark::State& state) {
  const auto f = make(static_cast<int>(state.range(0)), 5, 1000);
  PipelineConfig cfg;
  cfg.k_override = 5;
  for (auto _ : state) {
    Rng r(5);
    benchmark::DoNotOptimize(fit_nirvar(f.panel, cfg, r));
  }
}
BENCHMARK(BM_FullPipeline)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
