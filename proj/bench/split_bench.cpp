// Serial reference kernel against split_batch on one synthetic instance.
//
//   ./build/bench/split_bench --benchmark_filter=Batch
//
// Scenario sets are sampled once per size and shared across benchmarks.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "cvrpsd/parallel.hpp"
#include "cvrpsd/split.hpp"

namespace {

using namespace cvrpsd;

constexpr std::size_t kCustomers = 128;

const CvrpInstance& instance() {
  static const CvrpInstance inst = make_synthetic_instance({.customers = kCustomers, .seed = 1});
  return inst;
}

const ScenarioSet& scenarios(std::size_t m) {
  static std::map<std::size_t, std::unique_ptr<ScenarioSet>> cache;
  auto& slot = cache[m];
  if (!slot) {
    const auto& inst = instance();
    slot = std::make_unique<ScenarioSet>(sample_scenarios(
        DemandModel::uniform({inst.nominal_demands().begin(), inst.nominal_demands().end()}, 0.5, 1.5, 7), m));
  }
  return *slot;
}

SplitMode mode_of(std::int64_t penalized) {
  return penalized ? SplitMode::penalized(10.0 * instance().mean_arc_cost()) : SplitMode::strict();
}

void BM_SerialScalar(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto mode = mode_of(state.range(1));
  const GiantTour tour = identity_tour(instance());
  const auto tour_q = permute_to_tour_order(scenarios(m).view(), tour);
  for (auto _ : state) {
    double total = 0.0;
    for (std::size_t w = 0; w < m; ++w) total += split_scalar(tour, tour_q.row(w), instance().capacity(), mode).cost;
    benchmark::DoNotOptimize(total);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m));
}

void BM_Batch(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  SplitOptions opt;
  opt.mode = mode_of(state.range(1));
  opt.workers = static_cast<int>(state.range(2));
  const GiantTour tour = identity_tour(instance());
  const ScenarioSet& set = scenarios(m);
  for (auto _ : state) {
    auto res = split_batch(tour, set.view(), instance().capacity(), opt);
    benchmark::DoNotOptimize(res.cost.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m));
}

void serial_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"m", "penalized"});
  for (std::int64_t m : {1000, 10000}) {
    for (std::int64_t p : {0, 1}) b->Args({m, p});
  }
}

void batch_args(benchmark::internal::Benchmark* b) {
  b->ArgNames({"m", "penalized", "workers"});
  std::vector<std::int64_t> workers{1};
  for (int w = 2; w <= max_workers(); w *= 2) workers.push_back(w);
  if (workers.back() != max_workers()) workers.push_back(max_workers());
  for (std::int64_t m : {1000, 10000, 100000}) {
    for (std::int64_t p : {0, 1}) {
      for (std::int64_t w : workers) b->Args({m, p, w});
    }
  }
}

BENCHMARK(BM_SerialScalar)->Apply(serial_args)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Batch)->Apply(batch_args)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
