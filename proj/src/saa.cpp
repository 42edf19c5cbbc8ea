#include "cvrpsd/saa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "cvrpsd/error.hpp"
#include "cvrpsd/version.hpp"

namespace cvrpsd {

SaaEstimate summarize_costs(std::span<const double> costs, double first_stage) {
  SaaEstimate est;
  est.m = costs.size();
  // Moments are taken about the first feasible cost, so a constant sample
  // yields exactly that constant and zero variance.
  double shift = 0.0;
  bool have_shift = false;
  double sum = 0.0;
  std::size_t feasible = 0;
  for (double c : costs) {
    if (c == kInfeasibleCost) {
      ++est.infeasible_count;
      continue;
    }
    if (!have_shift) {
      shift = c;
      have_shift = true;
    }
    sum += c - shift;
    ++feasible;
  }
  if (feasible == 0) throw DataError("every scenario is infeasible for this tour");
  const double offset = sum / static_cast<double>(feasible);
  double squares = 0.0;
  for (double c : costs) {
    if (c == kInfeasibleCost) continue;
    const double d = (c - shift) - offset;
    squares += d * d;
  }
  est.variance = feasible > 1 ? squares / static_cast<double>(feasible - 1) : 0.0;
  est.std_error = std::sqrt(est.variance / static_cast<double>(feasible));
  est.mean = first_stage + (shift + offset);
  est.ci_low = est.mean - 1.96 * est.std_error;
  est.ci_high = est.mean + 1.96 * est.std_error;
  return est;
}

SaaEstimate estimate(const GiantTour& tour, DemandMatrixView scenarios, const CvrpInstance& instance,
                     SplitMode mode, const EstimateOptions& options) {
  if (scenarios.cols() != instance.customers()) {
    throw DataError("scenario set has " + std::to_string(scenarios.cols()) +
                    " customers, instance has " + std::to_string(instance.customers()));
  }
  if (scenarios.rows() == 0) throw UsageError("cannot estimate over an empty scenario set");
  SplitOptions split;
  split.mode = mode;
  split.workers = options.workers;
  split.tile_size = options.tile_size;
  const auto batch = split_batch(tour, scenarios, instance.capacity(), split);
  const double f1 = options.first_stage_cost ? options.first_stage_cost(tour) : 0.0;
  SaaEstimate est = summarize_costs(batch.cost, f1);
  est.wall_ms = batch.stats.wall_ms;
  return est;
}

SaaEstimate out_of_sample_eval(const GiantTour& tour, const ScenarioSet& test_set,
                               const CvrpInstance& instance, SplitMode mode,
                               std::span<const ScenarioProvenance> training,
                               const EstimateOptions& options) {
  SaaEstimate est = estimate(tour, test_set.view(), instance, mode, options);
  est.kind = SampleKind::out_of_sample;
  for (const auto& t : training) {
    if (t.seed == test_set.seed()) {
      est.warnings.push_back("test set seed " + std::to_string(t.seed) +
                             " overlaps a training set seed; estimate is not out-of-sample");
    }
  }
  return est;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t x = base ^ (tag * 0x9E3779B97F4A7C15ULL);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

BiasReport bias_experiment(const CvrpInstance& instance, const DemandModel& model,
                           const BiasExperimentConfig& config) {
  if (config.m_list.empty()) throw UsageError("m_list must not be empty");
  if (!std::is_sorted(config.m_list.begin(), config.m_list.end()) || config.m_list.front() == 0) {
    throw UsageError("m_list must be ascending and positive");
  }
  if (config.replicates == 0) throw UsageError("replicates must be at least 1");
  if (model.nominal.size() != instance.customers()) {
    throw DataError("demand model does not match the instance");
  }

  BiasReport report;
  report.instance_name = instance.name();
  report.model = model;
  report.config = config;
  report.test_m = config.test_m;
  report.test_seed = derive_seed(config.base_seed, 0);
  const ScenarioSet test_set =
      sample_scenarios(model.with_seed(report.test_seed), config.test_m, config.workers);

  EstimateOptions eval_options;
  eval_options.workers = config.workers;
  eval_options.tile_size = config.tile_size;

  for (std::size_t r = 0; r < config.replicates; ++r) {
    const std::uint64_t train_seed = derive_seed(config.base_seed, 1000 + r);
    const std::uint64_t search_seed = derive_seed(config.base_seed, 500000 + r);
    if (train_seed == report.test_seed) throw InternalError("derived train seed collides with test seed");
    // Training sets of one replicate are nested: the m=1 set is the first row
    // of the m=100 set, and so on.
    const ScenarioSet largest =
        sample_scenarios(model.with_seed(train_seed), config.m_list.back(), config.workers);
    for (std::size_t m : config.m_list) {
      const auto head = largest.demands().first(m * largest.customers());
      const ScenarioSet train(largest.model(), largest.customers(),
                              std::vector<std::uint16_t>(head.begin(), head.end()));
      BiasRow row;
      row.m = m;
      row.replicate = r;
      row.train_seed = train_seed;
      row.search_seed = search_seed;
      SearchConfig search = config.search;
      search.seed = search_seed;
      search.workers = config.workers;
      search.tile_size = config.tile_size;
      const SearchResult found = solve(instance, train, search);
      report.lambda = found.lambda;
      row.in_sample_mean = found.best.fitness;
      row.tour.assign(found.best.tour.order().begin(), found.best.tour.order().end());
      const ScenarioProvenance provenance = ScenarioProvenance::of(train);
      try {
        const SaaEstimate oos = out_of_sample_eval(found.best.tour, test_set, instance,
                                                   SplitMode::penalized(found.lambda),
                                                   std::span(&provenance, 1), eval_options);
        row.oos_mean = oos.mean;
        row.oos_stderr = oos.std_error;
      } catch (const DataError&) {
        row.failed = true;
      }
      report.rows.push_back(std::move(row));
    }
  }

  for (std::size_t m : config.m_list) {
    BiasAggregate agg;
    agg.m = m;
    std::vector<double> oos;
    double in_sum = 0.0;
    for (const auto& row : report.rows) {
      if (row.m != m || row.failed) continue;
      oos.push_back(row.oos_mean);
      in_sum += row.in_sample_mean;
    }
    agg.replicates = oos.size();
    if (!oos.empty()) {
      double sum = 0.0;
      for (double v : oos) sum += v;
      agg.oos_mean = sum / static_cast<double>(oos.size());
      agg.in_sample_mean = in_sum / static_cast<double>(oos.size());
      double sq = 0.0;
      for (double v : oos) sq += (v - agg.oos_mean) * (v - agg.oos_mean);
      agg.oos_mean_stderr =
          oos.size() > 1 ? std::sqrt(sq / static_cast<double>(oos.size() - 1) / static_cast<double>(oos.size())) : 0.0;
    }
    report.aggregates.push_back(agg);
  }
  return report;
}

std::string bias_report_csv(const BiasReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "m,replicate,train_seed,in_sample_mean,oos_mean,oos_stderr\n";
  for (const auto& row : report.rows) {
    out << row.m << ',' << row.replicate << ',' << row.train_seed << ',';
    if (row.failed) {
      out << ",,\n";
      continue;
    }
    out << row.in_sample_mean << ',' << row.oos_mean << ',' << row.oos_stderr << '\n';
  }
  return out.str();
}

std::string bias_report_json(const BiasReport& report) {
  using nlohmann::json;
  const auto& search = report.config.search;
  json j;
  j["version"] = kVersion;
  j["instance"] = report.instance_name;
  j["demand_model"] = {{"kind", to_string(report.model.kind)},
                       {"lo_frac", report.model.lo_frac},
                       {"hi_frac", report.model.hi_frac},
                       {"cv", report.model.cv},
                       {"factor_weight", report.model.factor_weight},
                       {"nominal", report.model.nominal}};
  j["objective"] = "penalized";
  j["lambda"] = report.lambda;
  j["base_seed"] = report.config.base_seed;
  j["test_seed"] = report.test_seed;
  j["test_m"] = report.test_m;
  j["m_list"] = report.config.m_list;
  j["replicates"] = report.config.replicates;
  j["workers"] = report.config.workers;
  j["tile_size"] = report.config.tile_size;
  j["search"] = {{"population_size", search.population_size},
                 {"offspring_per_generation", search.offspring_per_generation},
                 {"elite_fraction", search.elite_fraction},
                 {"mutation_probability", search.mutation_probability},
                 {"time_budget", search.time_budget},
                 {"max_generations", search.max_generations},
                 {"granular_neighbors", search.granular_neighbors},
                 {"screening_scenarios", search.screening_scenarios}};
  json rows = json::array();
  for (const auto& row : report.rows) {
    json r = {{"m", row.m},
              {"replicate", row.replicate},
              {"train_seed", row.train_seed},
              {"search_seed", row.search_seed},
              {"failed", row.failed},
              {"tour", row.tour}};
    if (!row.failed) {
      r["in_sample_mean"] = row.in_sample_mean;
      r["oos_mean"] = row.oos_mean;
      r["oos_stderr"] = row.oos_stderr;
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  json aggs = json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"m", a.m},
                    {"replicates", a.replicates},
                    {"in_sample_mean", a.in_sample_mean},
                    {"oos_mean", a.oos_mean},
                    {"oos_mean_stderr", a.oos_mean_stderr}});
  }
  j["aggregates"] = std::move(aggs);
  return j.dump(2);
}

std::vector<ConvergenceRow> convergence_diagnostics(const CvrpInstance& instance,
                                                    const DemandModel& model, const GiantTour& tour,
                                                    std::span<const std::size_t> m_grid,
                                                    SplitMode mode, const EstimateOptions& options) {
  if (m_grid.empty()) return {};
  const std::size_t largest = *std::max_element(m_grid.begin(), m_grid.end());
  const ScenarioSet set = sample_scenarios(model, largest, options.workers);
  std::vector<ConvergenceRow> rows;
  for (std::size_t m : m_grid) {
    const SaaEstimate est = estimate(tour, set.view().head(m), instance, mode, options);
    rows.push_back({m, est.mean, est.std_error, est.std_error * std::sqrt(static_cast<double>(m))});
  }
  return rows;
}

}  // namespace cvrpsd
