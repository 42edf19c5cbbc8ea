#pragma once

// Giant-tour search: a small genetic algorithm (order crossover, mutation,
// first-improvement local search) whose fitness is the mean penalized split
// cost over the training scenarios.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/scenario.hpp"
#include "cvrpsd/split.hpp"

namespace cvrpsd {

struct SearchConfig {
  std::size_t population_size = 25;
  std::size_t offspring_per_generation = 40;
  double elite_fraction = 0.4;
  double mutation_probability = 0.3;
  bool use_relocate = true;
  bool use_swap = true;
  bool use_two_opt = true;
  /// Overload penalty per demand unit; negative means 10x the mean arc cost.
  double lambda = -1.0;
  /// Wall-clock budget in seconds; 0 disables the time limit.
  double time_budget = 0.0;
  /// Generation cap; negative disables it. At least one budget must be set.
  long max_generations = -1;
  /// Local search tries moves only towards this many nearest customers.
  std::size_t granular_neighbors = 10;
  /// Accepted moves per local search call; negative means 10 * n.
  long move_cap = -1;
  /// Local search screens candidates on the first this-many scenarios.
  std::size_t screening_scenarios = 1024;
  std::uint64_t seed = 1;
  int workers = 0;
  std::size_t tile_size = kDefaultTileSize;

  void validate() const;
};

struct Individual {
  GiantTour tour;
  double fitness = 0.0;  ///< mean penalized cost over eval_m scenarios
  std::size_t eval_m = 0;
};

struct TraceEntry {
  double elapsed_ms = 0.0;
  std::size_t evaluations = 0;
  double best_penalized = 0.0;
  double best_strict = 0.0;  ///< NaN when every scenario is strictly infeasible
};

struct SearchResult {
  Individual best;
  std::vector<TraceEntry> trace;
  std::size_t evaluations = 0;
  std::size_t generations = 0;
  double lambda = 0.0;
  double elapsed_ms = 0.0;
};

using Deadline = std::optional<std::chrono::steady_clock::time_point>;

/// Mean penalized split cost of `tour` over `scenarios`.
double penalized_fitness(const GiantTour& tour, DemandMatrixView scenarios,
                         const CvrpInstance& instance, double lambda, int workers = 0,
                         std::size_t tile_size = kDefaultTileSize);

SearchResult solve(const CvrpInstance& instance, const ScenarioSet& train, const SearchConfig& config);

/// Order crossover keeping parent_a[first..last] (0-based, inclusive) in place
/// and filling the rest with parent_b's order, starting after `last` and
/// wrapping around.
std::vector<int> crossover_ox_slice(std::span<const int> parent_a, std::span<const int> parent_b,
                                    std::size_t first, std::size_t last);
std::vector<int> crossover_ox(std::span<const int> parent_a, std::span<const int> parent_b,
                              std::mt19937_64& rng);

struct LocalSearchOptions {
  bool use_relocate = true;
  bool use_swap = true;
  bool use_two_opt = true;
  std::size_t granular_neighbors = 10;
  long move_cap = -1;  ///< negative: 10 * n
  Deadline deadline;
  int workers = 0;
  std::size_t tile_size = kDefaultTileSize;
};

struct LocalSearchResult {
  GiantTour tour;
  double fitness = 0.0;
  std::size_t moves = 0;
  std::size_t evaluations = 0;
};

/// First-improvement descent over relocate, swap and 2-opt moves on the giant
/// tour, in randomized customer order. Never returns a worse tour.
LocalSearchResult local_search(const GiantTour& tour, DemandMatrixView scenarios,
                               const CvrpInstance& instance, double lambda, std::mt19937_64& rng,
                               const LocalSearchOptions& options = {});

/// elapsed_ms,evaluations,best_penalized_cost,best_strict_cost
std::string trace_csv(std::span<const TraceEntry> trace);

}  // namespace cvrpsd
