// Serial reference sweeps against their OpenMP counterparts.
#include "ecoassoc/inference.hpp"
#include "ecoassoc/kernels.hpp"
#include "ecoassoc/rng.hpp"
#include "ecoassoc/sim_community.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace ecoassoc;

namespace {

struct Problem {
  CommunityData data;
  FittedModel model;
  ContextTable table;
  std::vector<int> sites;
};

const Problem &problem(std::size_t m) {
  static std::map<std::size_t, Problem> cache;
  auto it = cache.find(m);
  if (it != cache.end())
    return it->second;
  Rng rng(1);
  const auto n = static_cast<Eigen::Index>(500);
  Matrix y(n, static_cast<Eigen::Index>(m)), x(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    x.row(k) << uniform(rng, -1, 1), uniform(rng, -1, 1);
    for (Eigen::Index i = 0; i < y.cols(); ++i)
      y(k, i) = bernoulli(rng, 0.5) ? std::floor(uniform(rng, 1, 10)) : 0.0;
  }
  y.row(0).setOnes();
  Problem p;
  p.data = make_community(y, x);
  ModelSpec spec;
  spec.dim = 8;
  p.model = initialize(p.data, spec, {});
  p.table = ContextTable(p.data, p.model.context);
  p.sites = kernels::all_sites(p.data.n_sites());
  return cache.emplace(m, std::move(p)).first->second;
}

template <bool Parallel> void BM_Loss(benchmark::State &state) {
  const Problem &p = problem(static_cast<std::size_t>(state.range(0)));
  const auto view = kernels::ModelView::of(p.model);
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::loss_parallel(view, p.data, p.table, p.sites)
                                      : kernels::loss_serial(view, p.data, p.table, p.sites));
}

template <bool Parallel> void BM_Gradient(benchmark::State &state) {
  const Problem &p = problem(static_cast<std::size_t>(state.range(0)));
  const auto view = kernels::ModelView::of(p.model);
  auto g = kernels::Gradient::zeros_like(view);
  for (auto _ : state) {
    if (Parallel)
      kernels::gradient_parallel(view, p.data, p.table, p.sites, nullptr, g);
    else
      kernels::gradient_serial(view, p.data, p.table, p.sites, nullptr, g);
    benchmark::DoNotOptimize(g.loss);
  }
}

template <bool Parallel> void BM_Predictors(benchmark::State &state) {
  const Problem &p = problem(static_cast<std::size_t>(state.range(0)));
  const auto view = kernels::ModelView::of(p.model);
  for (auto _ : state) {
    auto out = Parallel ? kernels::predictors_parallel(view, p.data, p.table)
                        : kernels::predictors_serial(view, p.data, p.table);
    benchmark::DoNotOptimize(out.biotic.data());
  }
}

void BM_Assembly(benchmark::State &state) {
  AssemblyConfig base;
  base.n_sites = 50;
  const ExperimentDesign design{AssociationKind::posneg, Density::sparse, Symmetry::symmetric, 20};
  const AssemblyConfig c = make_assembly_config(base, design, 20.0, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(run_assembly(c).data.abundance.data());
}

} // namespace

BENCHMARK(BM_Loss<false>)->Arg(20)->Arg(100);
BENCHMARK(BM_Loss<true>)->Arg(20)->Arg(100);
BENCHMARK(BM_Gradient<false>)->Arg(20)->Arg(100);
BENCHMARK(BM_Gradient<true>)->Arg(20)->Arg(100);
BENCHMARK(BM_Predictors<false>)->Arg(20)->Arg(100);
BENCHMARK(BM_Predictors<true>)->Arg(20)->Arg(100);
BENCHMARK(BM_Assembly);

BENCHMARK_MAIN();
