#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/scenario.hpp"
#include "cvrpsd/search.hpp"
#include "cvrpsd/split.hpp"

namespace cvrpsd {

enum class SampleKind { in_sample, out_of_sample };

/// Sample-average statistics of the split cost of one tour.
struct SaaEstimate {
  std::size_t m = 0;  ///< scenarios evaluated, infeasible ones included
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased sample variance of feasible costs
  double std_error = 0.0;
  double ci_low = 0.0;  ///< mean -/+ 1.96 std_error
  double ci_high = 0.0;
  std::size_t infeasible_count = 0;
  SampleKind kind = SampleKind::in_sample;
  std::vector<std::string> warnings;
  double wall_ms = 0.0;
};

struct EstimateOptions {
  int workers = 0;
  std::size_t tile_size = kDefaultTileSize;
  /// First-stage cost f1(x); unset means zero.
  std::function<double(const GiantTour&)> first_stage_cost;
};

/// Statistics over per-scenario costs; kInfeasibleCost entries are excluded
/// from the moments and counted. Throws DataError if none is feasible.
SaaEstimate summarize_costs(std::span<const double> costs, double first_stage = 0.0);

SaaEstimate estimate(const GiantTour& tour, DemandMatrixView scenarios, const CvrpInstance& instance,
                     SplitMode mode, const EstimateOptions& options = {});

/// Where a scenario set came from; used to detect train/test overlap.
struct ScenarioProvenance {
  std::uint64_t seed = 0;
  DemandKind kind = DemandKind::fixed;

  static ScenarioProvenance of(const ScenarioSet& set) { return {set.seed(), set.model().kind}; }
};

/// estimate() on a held-out set. A test seed equal to any training seed is
/// reported as a warning on the result, not as an error.
SaaEstimate out_of_sample_eval(const GiantTour& tour, const ScenarioSet& test_set,
                               const CvrpInstance& instance, SplitMode mode,
                               std::span<const ScenarioProvenance> training,
                               const EstimateOptions& options = {});

struct BiasRow {
  std::size_t m = 0;
  std::size_t replicate = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t search_seed = 0;
  double in_sample_mean = 0.0;
  double oos_mean = 0.0;
  double oos_stderr = 0.0;
  bool failed = false;
  std::vector<int> tour;
};

struct BiasAggregate {
  std::size_t m = 0;
  std::size_t replicates = 0;
  double in_sample_mean = 0.0;
  double oos_mean = 0.0;
  double oos_mean_stderr = 0.0;  ///< across replicates
};

struct BiasExperimentConfig {
  std::vector<std::size_t> m_list{1, 100, 1000};
  std::size_t replicates = 10;
  std::size_t test_m = 100000;
  std::uint64_t base_seed = 2024;
  SearchConfig search;  ///< its seed is replaced per replicate
  int workers = 0;
  std::size_t tile_size = kDefaultTileSize;
};

struct BiasReport {
  std::string instance_name;
  DemandModel model;  ///< law only; seeds are per row
  std::uint64_t test_seed = 0;
  std::size_t test_m = 0;
  double lambda = 0.0;
  BiasExperimentConfig config;
  std::vector<BiasRow> rows;
  std::vector<BiasAggregate> aggregates;
};

/// Seeds derived for the experiment; train seeds never equal the test seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag);

/// For every m and replicate: sample a training set, search it, and score the
/// result on one shared test set. Objective is the penalized split cost.
BiasReport bias_experiment(const CvrpInstance& instance, const DemandModel& model,
                           const BiasExperimentConfig& config);

/// m,replicate,train_seed,in_sample_mean,oos_mean,oos_stderr
std::string bias_report_csv(const BiasReport& report);
std::string bias_report_json(const BiasReport& report);

struct ConvergenceRow {
  std::size_t m = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double scaled_std_error = 0.0;  ///< std_error * sqrt(m)
};

/// Fixed-tour estimates on nested prefixes of one sample of max(m_grid)
/// scenarios drawn from `model`.
std::vector<ConvergenceRow> convergence_diagnostics(const CvrpInstance& instance,
                                                    const DemandModel& model, const GiantTour& tour,
                                                    std::span<const std::size_t> m_grid,
                                                    SplitMode mode,
                                                    const EstimateOptions& options = {});

}  // namespace cvrpsd
