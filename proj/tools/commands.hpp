#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/scenario.hpp"
#include "cvrpsd/search.hpp"
#include "cvrpsd/split.hpp"

namespace cvrpsd::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kData = 3, kResource = 4 };

/// Runs the command line `args` (without the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

double median(std::vector<double> values);

/// Best penalized cost known at each grid time; NaN before the first entry.
std::vector<double> sample_trace(std::span<const TraceEntry> trace, std::span<const double> grid_ms);

struct ScalingRow {
  std::size_t m = 0;
  int workers = 0;
  std::size_t tile_size = 0;
  int rep = 0;  ///< -1 marks the median row
  double wall_ms = 0.0;
  double scenarios_per_sec = 0.0;
};

/// Times split_batch for every (m, workers) pair: one discarded warm-up run,
/// then `reps` timed runs and their median. Scenarios for smaller m are
/// prefixes of one sample of max(m_grid).
std::vector<ScalingRow> run_scaling(const CvrpInstance& instance, const DemandModel& model,
                                    std::span<const std::size_t> m_grid,
                                    std::span<const int> worker_counts, std::size_t tile_size,
                                    int reps, SplitMode mode);

struct BudgetRun {
  int workers = 0;
  std::uint64_t seed = 0;
  SearchResult result;
};

/// solve() once per (workers, seed), each with `base`'s budget.
std::vector<BudgetRun> run_budget(const CvrpInstance& instance, const ScenarioSet& train,
                                  const SearchConfig& base, std::span<const int> worker_counts,
                                  std::span<const std::uint64_t> seeds);

/// "1,max,4" -> {1, max_workers(), 4}
std::vector<int> parse_worker_list(const std::string& text);

}  // namespace cvrpsd::cli
