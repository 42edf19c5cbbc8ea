#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <new>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvrpsd/error.hpp"
#include "cvrpsd/parallel.hpp"
#include "cvrpsd/saa.hpp"
#include "cvrpsd/version.hpp"

namespace cvrpsd::cli {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size() / 2;
  return values.size() % 2 ? values[k] : 0.5 * (values[k - 1] + values[k]);
}

std::vector<double> sample_trace(std::span<const TraceEntry> trace, std::span<const double> grid_ms) {
  std::vector<double> out;
  out.reserve(grid_ms.size());
  for (double t : grid_ms) {
    double best = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : trace) {
      if (e.elapsed_ms > t) break;
      best = e.best_penalized;
    }
    out.push_back(best);
  }
  return out;
}

std::vector<int> parse_worker_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "max") {
      out.push_back(max_workers());
      continue;
    }
    std::size_t used = 0;
    int w = 0;
    try {
      w = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || w < 1) throw UsageError("invalid worker count '" + item + "'");
    out.push_back(w);
  }
  if (out.empty()) throw UsageError("worker list is empty");
  return out;
}

std::vector<ScalingRow> run_scaling(const CvrpInstance& instance, const DemandModel& model,
                                    std::span<const std::size_t> m_grid,
                                    std::span<const int> worker_counts, std::size_t tile_size,
                                    int reps, SplitMode mode) {
  if (m_grid.empty() || worker_counts.empty()) throw UsageError("scaling grid is empty");
  if (reps < 1) throw UsageError("repetitions must be at least 1");
  const std::size_t largest = *std::max_element(m_grid.begin(), m_grid.end());
  const ScenarioSet set = sample_scenarios(model, largest);
  const GiantTour tour = identity_tour(instance);
  std::vector<ScalingRow> rows;
  for (std::size_t m : m_grid) {
    for (int workers : worker_counts) {
      SplitOptions opt;
      opt.mode = mode;
      opt.tile_size = tile_size;
      opt.workers = workers;
      const DemandMatrixView view = set.view().head(m);
      auto timed = [&] {
        const auto start = Clock::now();
        const auto res = split_batch(tour, view, instance.capacity(), opt);
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        if (res.cost.size() != m) throw InternalError("split_batch returned wrong row count");
        return ms;
      };
      timed();  // warm-up
      std::vector<double> times;
      for (int r = 0; r < reps; ++r) {
        const double ms = timed();
        times.push_back(ms);
        rows.push_back({m, workers, tile_size, r, ms, 1e3 * static_cast<double>(m) / ms});
      }
      const double med = median(times);
      rows.push_back({m, workers, tile_size, -1, med, 1e3 * static_cast<double>(m) / med});
    }
  }
  return rows;
}

std::vector<BudgetRun> run_budget(const CvrpInstance& instance, const ScenarioSet& train,
                                  const SearchConfig& base, std::span<const int> worker_counts,
                                  std::span<const std::uint64_t> seeds) {
  std::vector<BudgetRun> runs;
  // Seed-major order so slow drift of the machine affects all worker
  // counts alike.
  for (std::uint64_t seed : seeds) {
    for (int workers : worker_counts) {
      SearchConfig cfg = base;
      cfg.seed = seed;
      cfg.workers = workers;
      runs.push_back({workers, seed, solve(instance, train, cfg)});
    }
  }
  return runs;
}

namespace {

struct InstanceArgs {
  std::string path;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  std::string rounding = "nearest";
};

struct ModelArgs {
  std::string kind = "uniform";
  double lo_frac = 0.5;
  double hi_frac = 1.5;
  double cv = 0.3;
  double rho = 0.5;
};

struct RunArgs {
  std::size_t m = 10000;
  std::uint64_t seed = 1;
  int workers = 0;
  std::size_t tile = kDefaultTileSize;
  std::string mode = "strict";
  double lambda = -1.0;
  std::string out;
};

void add_instance(CLI::App* cmd, InstanceArgs& a) {
  cmd->add_option("--instance", a.path, "TSPLIB-style CVRP instance file");
  cmd->add_option("--n", a.n, "Synthetic instance with this many customers (instead of --instance)");
  cmd->add_option("--instance-seed", a.seed, "Seed of the synthetic instance")->capture_default_str();
  cmd->add_option("--rounding", a.rounding, "Distance rounding: exact or nearest")
      ->check(CLI::IsMember({"exact", "nearest"}))
      ->capture_default_str();
}

void add_model(CLI::App* cmd, ModelArgs& a) {
  cmd->add_option("--model", a.kind, "Demand model: fixed, uniform, normal, correlated")
      ->check(CLI::IsMember({"fixed", "uniform", "normal", "correlated"}))
      ->capture_default_str();
  cmd->add_option("--lo-frac", a.lo_frac, "Uniform model lower bound as a fraction of nominal")->capture_default_str();
  cmd->add_option("--hi-frac", a.hi_frac, "Uniform model upper bound as a fraction of nominal")->capture_default_str();
  cmd->add_option("--cv", a.cv, "Coefficient of variation (normal, correlated)")->capture_default_str();
  cmd->add_option("--rho", a.rho, "Common-factor weight (correlated)")->capture_default_str();
}

void add_run(CLI::App* cmd, RunArgs& a, bool with_mode) {
  cmd->add_option("--m", a.m, "Number of scenarios")->capture_default_str();
  cmd->add_option("--seed", a.seed, "Scenario seed")->capture_default_str();
  cmd->add_option("--workers", a.workers, "Worker threads (0: all available)")->capture_default_str();
  cmd->add_option("--tile", a.tile, "Scenarios per split tile")->capture_default_str();
  cmd->add_option("--out", a.out, "Output path (default: standard output)");
  if (with_mode) {
    cmd->add_option("--mode", a.mode, "Capacity handling: strict or penalized")
        ->check(CLI::IsMember({"strict", "penalized"}))
        ->capture_default_str();
    cmd->add_option("--lambda", a.lambda, "Overload penalty per unit (default: 10x mean arc cost)");
  }
}

CvrpInstance make_instance(const InstanceArgs& a) {
  const Rounding rounding = a.rounding == "exact" ? Rounding::exact : Rounding::nearest_integer;
  if (!a.path.empty() && a.n > 0) throw UsageError("give either --instance or --n, not both");
  if (!a.path.empty()) return load_instance(a.path, rounding);
  if (a.n == 0) throw UsageError("an instance is required: --instance PATH or --n N");
  SyntheticOptions opt;
  opt.customers = a.n;
  opt.seed = a.seed;
  opt.rounding = rounding;
  return make_synthetic_instance(opt);
}

DemandModel make_model(const CvrpInstance& inst, const ModelArgs& a, std::uint64_t seed) {
  std::vector<int> nominal(inst.nominal_demands().begin(), inst.nominal_demands().end());
  DemandModel model;
  switch (demand_kind_from_string(a.kind)) {
    case DemandKind::fixed: model = DemandModel::fixed(std::move(nominal), seed); break;
    case DemandKind::uniform_integer:
      model = DemandModel::uniform(std::move(nominal), a.lo_frac, a.hi_frac, seed);
      break;
    case DemandKind::truncated_normal: model = DemandModel::truncated_normal(std::move(nominal), a.cv, seed); break;
    case DemandKind::correlated: model = DemandModel::correlated(std::move(nominal), a.cv, a.rho, seed); break;
  }
  model.validate();
  return model;
}

double resolve_lambda(const CvrpInstance& inst, double lambda) {
  return lambda >= 0.0 ? lambda : 10.0 * inst.mean_arc_cost();
}

SplitMode make_mode(const CvrpInstance& inst, const RunArgs& a) {
  if (a.mode == "penalized") return SplitMode::penalized(resolve_lambda(inst, a.lambda));
  return SplitMode::strict();
}

std::vector<int> parse_tour(const CvrpInstance& inst, const std::string& text) {
  if (text.empty()) {
    std::vector<int> order(inst.customers());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k + 1);
    return order;
  }
  std::string body = text;
  if (body.front() == '@') {
    std::ifstream in(body.substr(1));
    if (!in) throw DataError("cannot open tour file '" + body.substr(1) + "'");
    body.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::replace(body.begin(), body.end(), ',', ' ');
  std::istringstream in(body);
  std::vector<int> order;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    int c = 0;
    try {
      c = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw DataError("invalid customer id '" + tok + "' in tour");
    order.push_back(c);
  }
  return order;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v >= 1) || v != std::floor(v)) {
      throw UsageError(std::string("invalid ") + what + " entry '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError(std::string(what) + " is empty");
  return out;
}

json instance_json(const CvrpInstance& inst, const InstanceArgs& a) {
  json j{{"name", inst.name()},
         {"customers", inst.customers()},
         {"capacity", inst.capacity()},
         {"rounding", a.rounding}};
  if (a.path.empty()) {
    j["synthetic"] = true;
    j["instance_seed"] = a.seed;
  } else {
    j["path"] = a.path;
  }
  return j;
}

json model_json(const DemandModel& model) {
  return {{"kind", to_string(model.kind)},
          {"lo_frac", model.lo_frac},
          {"hi_frac", model.hi_frac},
          {"cv", model.cv},
          {"rho", model.factor_weight},
          {"seed", model.seed}};
}

json estimate_json(const SaaEstimate& e) {
  return {{"m", e.m},
          {"mean", e.mean},
          {"variance", e.variance},
          {"std_error", e.std_error},
          {"ci95", {e.ci_low, e.ci_high}},
          {"infeasible_count", e.infeasible_count},
          {"kind", e.kind == SampleKind::in_sample ? "in_sample" : "out_of_sample"},
          {"warnings", e.warnings}};
}

/// Resolved configuration of the current invocation, as TOML, defaults
/// included. Set once per run() before any command executes.
thread_local std::string resolved_config;

json header(const std::string& command, int workers, std::size_t tile) {
  return {{"version", kVersion},
          {"command", command},
          {"workers", resolve_workers(workers)},
          {"tile_size", tile},
          {"config", resolved_config}};
}

/// Writes to `path`, or to `fallback` when path is empty.
void emit(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw ResourceError("failed writing '" + path + "'");
}

/// CSV preamble: every metadata field on its own "# key: value" line.
std::string csv_preamble(const json& meta) {
  std::string out;
  for (const auto& [key, value] : meta.items()) {
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (text.find('\n') == std::string::npos) {
      out += "# " + key + ": " + text + "\n";
      continue;
    }
    out += "# " + key + ":\n";
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) out += "#   " + line + "\n";
  }
  return out;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

ScenarioSet scenarios_for(const CvrpInstance& inst, const ModelArgs& margs, const RunArgs& run,
                          const std::string& scenario_path) {
  if (!scenario_path.empty()) {
    ScenarioSet set = load_scenarios(scenario_path);
    if (set.customers() != inst.customers()) {
      throw DataError("scenario file has " + std::to_string(set.customers()) + " customers, instance has " +
                      std::to_string(inst.customers()));
    }
    return set;
  }
  return sample_scenarios(make_model(inst, margs, run.seed), run.m, run.workers);
}

// --- commands ----------------------------------------------------------------

struct GenArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
};

void cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.run.out.empty()) throw UsageError("gen-scenarios needs --out");
  const CvrpInstance inst = make_instance(a.inst);
  const DemandModel model = make_model(inst, a.model, a.run.seed);
  const ScenarioSet set = sample_scenarios(model, a.run.m, a.run.workers);
  const std::uint32_t crc = save_scenarios(set, a.run.out);
  std::ostringstream digest;
  digest << std::hex << std::setw(8) << std::setfill('0') << crc;
  json j = header("gen-scenarios", a.run.workers, a.run.tile);
  j["instance"] = instance_json(inst, a.inst);
  j["model"] = model_json(model);
  j["seeds"] = {{"scenario_seed", a.run.seed}};
  j["m"] = set.scenarios();
  j["file"] = a.run.out;
  j["bytes"] = scenario_file_size(model, set.scenarios(), set.customers());
  j["crc32"] = digest.str();
  emit(a.run.out + ".json", j.dump(2) + "\n", out);
  out << j.dump(2) << "\n";
}

struct EvalArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
  std::string tour;
  std::string scenarios;
  bool oracle_check = false;
};

bool oracle_check(const GiantTour& tour, const ScenarioSet& set, const CvrpInstance& inst, SplitMode mode,
                  const std::vector<double>& batch_cost) {
  const std::size_t rows = std::min<std::size_t>(set.scenarios(), 1000);
  const auto tour_q = permute_to_tour_order(set.view().head(rows), tour);
  const auto masks = compute_masks(demand_prefix_sums(tour_q), inst.capacity(), 1);
  for (std::size_t w = 0; w < rows; ++w) {
    const auto scalar = split_scalar(tour, tour_q.row(w), inst.capacity(), mode);
    const auto masked = split_masked(tour, masks.row(w), tour_q.row(w), inst.capacity(), mode);
    if (scalar.cost != batch_cost[w] || masked.cost != batch_cost[w]) return false;
    if (tour.size() <= kBruteForceMaxCustomers && w < 100) {
      if (brute_force_split(tour, tour_q.row(w), inst.capacity(), mode).cost != batch_cost[w]) return false;
    }
  }
  return true;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const CvrpInstance inst = make_instance(a.inst);
  const GiantTour tour = make_tour(inst, parse_tour(inst, a.tour));
  const ScenarioSet set = scenarios_for(inst, a.model, a.run, a.scenarios);
  const SplitMode mode = make_mode(inst, a.run);

  SplitOptions opt;
  opt.mode = mode;
  opt.workers = a.run.workers;
  opt.tile_size = a.run.tile;
  const auto start = Clock::now();
  const auto batch = split_batch(tour, set.view(), inst.capacity(), opt);
  const double wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  SaaEstimate est = summarize_costs(batch.cost);
  est.wall_ms = wall_ms;

  json j = header("eval", a.run.workers, a.run.tile);
  j["instance"] = instance_json(inst, a.inst);
  j["model"] = model_json(set.model());
  j["seeds"] = {{"scenario_seed", set.seed()}};
  j["scenario_source"] = a.scenarios.empty() ? "sampled" : a.scenarios;
  j["mode"] = a.run.mode;
  if (mode.is_penalized()) j["lambda"] = mode.lambda;
  j["tour"] = std::vector<int>(tour.order().begin(), tour.order().end());
  j["estimate"] = estimate_json(est);
  int code = kOk;
  if (a.oracle_check) {
    const bool pass = oracle_check(tour, set, inst, mode, batch.cost);
    j["oracle_check"] = pass ? "PASS" : "FAIL";
    err << "oracle: " << (pass ? "PASS" : "FAIL") << "\n";
    if (!pass) code = kFailure;
  }
  j["timing"] = {{"wall_ms", wall_ms},
                 {"scenarios_per_sec", 1e3 * static_cast<double>(set.scenarios()) / wall_ms},
                 {"integer_kernel", batch.stats.integer_kernel}};
  emit(a.run.out, j.dump(2) + "\n", out);
  return code;
}

struct SearchArgs {
  double time_budget = 0.0;
  long generations = -1;
  std::size_t population = 25;
  std::size_t offspring = 40;
  std::uint64_t search_seed = 1;
  std::size_t screening = 1024;
};

void add_search(CLI::App* cmd, SearchArgs& s, bool with_seed) {
  cmd->add_option("--time", s.time_budget, "Wall-clock budget per search in seconds")->capture_default_str();
  cmd->add_option("--generations", s.generations, "Generation cap (negative: none)")->capture_default_str();
  cmd->add_option("--population", s.population, "Population size")->capture_default_str();
  cmd->add_option("--offspring", s.offspring, "Offspring per generation")->capture_default_str();
  cmd->add_option("--screening", s.screening, "Scenarios used to screen local-search moves")->capture_default_str();
  if (with_seed) cmd->add_option("--search-seed", s.search_seed, "Search seed")->capture_default_str();
}

SearchConfig search_config(const SearchArgs& s, const RunArgs& run) {
  SearchConfig cfg;
  cfg.time_budget = s.time_budget;
  cfg.max_generations = s.generations;
  cfg.population_size = s.population;
  cfg.offspring_per_generation = s.offspring;
  cfg.seed = s.search_seed;
  cfg.screening_scenarios = s.screening;
  cfg.lambda = run.lambda;
  cfg.workers = run.workers;
  cfg.tile_size = run.tile;
  return cfg;
}

json search_json(const SearchConfig& cfg) {
  return {{"time_budget", cfg.time_budget},
          {"max_generations", cfg.max_generations},
          {"population_size", cfg.population_size},
          {"offspring_per_generation", cfg.offspring_per_generation},
          {"elite_fraction", cfg.elite_fraction},
          {"mutation_probability", cfg.mutation_probability},
          {"granular_neighbors", cfg.granular_neighbors},
          {"screening_scenarios", cfg.screening_scenarios},
          {"search_seed", cfg.seed}};
}

struct SolveArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
  SearchArgs search;
  std::string scenarios;
  std::string trace_out;
};

void cmd_solve(const SolveArgs& a, std::ostream& out) {
  const CvrpInstance inst = make_instance(a.inst);
  const ScenarioSet train = scenarios_for(inst, a.model, a.run, a.scenarios);
  SearchConfig cfg = search_config(a.search, a.run);
  if (cfg.time_budget == 0.0 && cfg.max_generations < 0) cfg.time_budget = 10.0;
  const SearchResult res = solve(inst, train, cfg);
  EstimateOptions eopt;
  eopt.workers = a.run.workers;
  eopt.tile_size = a.run.tile;

  json j = header("solve", a.run.workers, a.run.tile);
  j["instance"] = instance_json(inst, a.inst);
  j["model"] = model_json(train.model());
  j["seeds"] = {{"scenario_seed", train.seed()}, {"search_seed", cfg.seed}};
  j["m"] = train.scenarios();
  j["search"] = search_json(cfg);
  j["lambda"] = res.lambda;
  j["tour"] = std::vector<int>(res.best.tour.order().begin(), res.best.tour.order().end());
  j["penalized_mean"] = res.best.fitness;
  try {
    j["strict_estimate"] = estimate_json(estimate(res.best.tour, train.view(), inst, SplitMode::strict(), eopt));
  } catch (const DataError&) {
    j["strict_estimate"] = nullptr;
  }
  j["generations"] = res.generations;
  j["evaluations"] = res.evaluations;
  json trace = json::array();
  for (const auto& e : res.trace) {
    trace.push_back({{"elapsed_ms", e.elapsed_ms},
                     {"evaluations", e.evaluations},
                     {"best_penalized_cost", e.best_penalized},
                     {"best_strict_cost", std::isnan(e.best_strict) ? json(nullptr) : json(e.best_strict)}});
  }
  j["timing"] = {{"elapsed_ms", res.elapsed_ms}, {"trace", trace}};
  if (!a.trace_out.empty()) {
    json meta = header("solve", a.run.workers, a.run.tile);
    meta["instance"] = inst.name();
    meta["seeds"] = j["seeds"];
    meta["search"] = j["search"];
    emit(a.trace_out, csv_preamble(meta) + trace_csv(res.trace), out);
  }
  emit(a.run.out, j.dump(2) + "\n", out);
}

struct ScalingArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
  std::string m_grid = "10000,100000,1000000";
  std::string workers = "1,max";
  int reps = 5;
};

void cmd_scaling(const ScalingArgs& a, std::ostream& out, std::ostream& err) {
  InstanceArgs ia = a.inst;
  if (ia.path.empty() && ia.n == 0) ia.n = 128;
  const CvrpInstance inst = make_instance(ia);
  const DemandModel model = make_model(inst, a.model, a.run.seed);
  const auto grid = parse_size_list(a.m_grid, "m grid");
  const auto workers = parse_worker_list(a.workers);
  const SplitMode mode = make_mode(inst, a.run);
  const auto rows = run_scaling(inst, model, grid, workers, a.run.tile, a.reps, mode);

  json meta = header("bench-scaling", 0, a.run.tile);
  meta.erase("workers");
  meta["worker_counts"] = workers;
  meta["hardware_threads"] = max_workers();
  meta["instance"] = instance_json(inst, ia);
  meta["model"] = model_json(model);
  meta["seeds"] = {{"scenario_seed", a.run.seed}};
  meta["m_grid"] = grid;
  meta["repetitions"] = a.reps;
  meta["mode"] = a.run.mode;
  std::string csv = csv_preamble(meta) + "m,workers,tile_size,rep,wall_ms,scenarios_per_sec\n";
  for (const auto& r : rows) {
    csv += std::to_string(r.m) + ',' + std::to_string(r.workers) + ',' + std::to_string(r.tile_size) + ',' +
           (r.rep < 0 ? std::string("median") : std::to_string(r.rep)) + ',' + fmt(r.wall_ms) + ',' +
           fmt(r.scenarios_per_sec) + '\n';
    if (r.rep < 0) {
      err << "m=" << r.m << " workers=" << r.workers << " median " << std::fixed << std::setprecision(2)
          << r.wall_ms << " ms\n";
    }
  }
  emit(a.run.out, csv, out);
}

struct TrainsizeArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
  SearchArgs search{.population = 10, .offspring = 10};
  std::string m_list = "1,100,1000";
  std::size_t replicates = 10;
  std::size_t test_m = 100000;
  std::uint64_t base_seed = 2024;
  std::string prefix = "trainsize";
};

void cmd_trainsize(const TrainsizeArgs& a, std::ostream& out) {
  InstanceArgs ia = a.inst;
  if (ia.path.empty() && ia.n == 0) ia.n = 20;
  const CvrpInstance inst = make_instance(ia);
  BiasExperimentConfig cfg;
  cfg.m_list = parse_size_list(a.m_list, "m list");
  cfg.replicates = a.replicates;
  cfg.test_m = a.test_m;
  cfg.base_seed = a.base_seed;
  cfg.workers = a.run.workers;
  cfg.tile_size = a.run.tile;
  cfg.search = search_config(a.search, a.run);
  if (cfg.search.time_budget == 0.0 && cfg.search.max_generations < 0) cfg.search.max_generations = 10;
  const DemandModel model = make_model(inst, a.model, 0);
  const BiasReport report = bias_experiment(inst, model, cfg);

  json meta = header("experiment-trainsize", a.run.workers, a.run.tile);
  meta["instance"] = instance_json(inst, ia);
  meta["base_seed"] = cfg.base_seed;
  meta["test_seed"] = report.test_seed;
  meta["search"] = search_json(cfg.search);
  meta["model"] = model_json(model);
  emit(a.prefix + ".csv", csv_preamble(meta) + bias_report_csv(report), out);
  emit(a.prefix + ".json", bias_report_json(report) + "\n", out);
  json summary = json::array();
  for (const auto& agg : report.aggregates) {
    summary.push_back({{"m", agg.m},
                       {"replicates", agg.replicates},
                       {"in_sample_mean", agg.in_sample_mean},
                       {"oos_mean", agg.oos_mean},
                       {"oos_mean_stderr", agg.oos_mean_stderr}});
  }
  out << summary.dump(2) << "\n";
}

struct BudgetArgs {
  InstanceArgs inst;
  ModelArgs model;
  RunArgs run;
  SearchArgs search;
  std::string seeds = "1,2,3,4,5";
  std::string workers = "1,max";
  double grid_ms = 250.0;
  std::string prefix = "budget";
};

void cmd_budget(const BudgetArgs& a, std::ostream& out) {
  InstanceArgs ia = a.inst;
  if (ia.path.empty() && ia.n == 0) ia.n = 100;
  const CvrpInstance inst = make_instance(ia);
  const ScenarioSet train = sample_scenarios(make_model(inst, a.model, a.run.seed), a.run.m, a.run.workers);
  SearchConfig cfg = search_config(a.search, a.run);
  if (cfg.time_budget == 0.0) cfg.time_budget = 10.0;
  if (!(a.grid_ms > 0.0)) throw UsageError("grid step must be positive");
  std::vector<std::uint64_t> seeds;
  for (std::size_t s : parse_size_list(a.seeds, "seed list")) seeds.push_back(s);
  const auto workers = parse_worker_list(a.workers);
  const auto runs = run_budget(inst, train, cfg, workers, seeds);

  json meta = header("bench-budget", 0, a.run.tile);
  meta.erase("workers");
  meta["worker_counts"] = workers;
  meta["hardware_threads"] = max_workers();
  meta["instance"] = instance_json(inst, ia);
  meta["model"] = model_json(train.model());
  meta["seeds"] = {{"scenario_seed", a.run.seed}, {"search_seeds", seeds}};
  meta["m"] = train.scenarios();
  meta["search"] = search_json(cfg);
  meta["lambda"] = runs.empty() ? 0.0 : runs.front().result.lambda;

  std::string traces = csv_preamble(meta) + "workers,seed,elapsed_ms,evaluations,best_penalized_cost,best_strict_cost\n";
  for (const auto& r : runs) {
    for (const auto& e : r.result.trace) {
      traces += std::to_string(r.workers) + ',' + std::to_string(r.seed) + ',' + fmt(e.elapsed_ms) + ',' +
                std::to_string(e.evaluations) + ',' + fmt(e.best_penalized) + ',' + fmt(e.best_strict) + '\n';
    }
  }
  std::vector<double> grid;
  for (double t = a.grid_ms; t <= cfg.time_budget * 1e3 + 1e-9; t += a.grid_ms) grid.push_back(t);
  std::string sampled = csv_preamble(meta) + "t_ms,workers,seed,best_penalized_cost\n";
  for (int w : workers) {
    std::vector<std::vector<double>> per_seed;
    for (const auto& r : runs) {
      if (r.workers != w) continue;
      per_seed.push_back(sample_trace(r.result.trace, grid));
      for (std::size_t g = 0; g < grid.size(); ++g) {
        sampled += fmt(grid[g]) + ',' + std::to_string(w) + ',' + std::to_string(r.seed) + ',' +
                   fmt(per_seed.back()[g]) + '\n';
      }
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      std::vector<double> vals;
      for (const auto& s : per_seed) {
        if (!std::isnan(s[g])) vals.push_back(s[g]);
      }
      sampled += fmt(grid[g]) + ',' + std::to_string(w) + ",median," +
                 (vals.size() == per_seed.size() ? fmt(median(vals)) : std::string()) + '\n';
    }
  }
  emit(a.prefix + "_traces.csv", traces, out);
  emit(a.prefix + "_grid.csv", sampled, out);
  out << "wrote " << a.prefix << "_traces.csv and " << a.prefix << "_grid.csv\n";
}

template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << "\n";
    return kResource;
  } catch (const std::bad_alloc&) {
    err << "resource error: out of memory\n";
    return kResource;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Split-based evaluation and search for vehicle routing with stochastic demands", "cvrpsd"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-scenarios", "Sample a scenario set and write it to a binary file");
  add_instance(gen_cmd, gen.inst);
  add_model(gen_cmd, gen.model);
  add_run(gen_cmd, gen.run, false);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Estimate the expected split cost of one giant tour");
  add_instance(eval_cmd, ev.inst);
  add_model(eval_cmd, ev.model);
  add_run(eval_cmd, ev.run, true);
  eval_cmd->add_option("--tour", ev.tour, "Customer order, comma separated, or @file (default: identity)");
  eval_cmd->add_option("--scenarios", ev.scenarios, "Scenario file from gen-scenarios (default: sample)");
  eval_cmd->add_flag("--oracle-check", ev.oracle_check, "Cross-check split_batch against the serial kernels");

  SolveArgs sv;
  auto* solve_cmd = app.add_subcommand("solve", "Search a giant tour minimizing the sample-average penalized cost");
  add_instance(solve_cmd, sv.inst);
  add_model(solve_cmd, sv.model);
  add_run(solve_cmd, sv.run, false);
  solve_cmd->add_option("--lambda", sv.run.lambda, "Overload penalty per unit (default: 10x mean arc cost)");
  add_search(solve_cmd, sv.search, true);
  solve_cmd->add_option("--scenarios", sv.scenarios, "Training scenario file (default: sample)");
  solve_cmd->add_option("--trace-out", sv.trace_out, "Write the anytime trace as CSV");

  ScalingArgs sc;
  auto* scaling_cmd = app.add_subcommand("bench-scaling", "Time split_batch over a grid of scenario counts");
  add_instance(scaling_cmd, sc.inst);
  add_model(scaling_cmd, sc.model);
  add_run(scaling_cmd, sc.run, true);
  scaling_cmd->add_option("--m-grid", sc.m_grid, "Comma-separated scenario counts")->capture_default_str();
  scaling_cmd->add_option("--workers-list", sc.workers, "Comma-separated worker counts; 'max' for all")
      ->capture_default_str();
  scaling_cmd->add_option("--reps", sc.reps, "Timed repetitions per point")->capture_default_str();

  TrainsizeArgs ts;
  auto* ts_cmd = app.add_subcommand("experiment-trainsize", "Out-of-sample cost of tours trained on m scenarios");
  add_instance(ts_cmd, ts.inst);
  add_model(ts_cmd, ts.model);
  add_run(ts_cmd, ts.run, false);
  ts_cmd->add_option("--lambda", ts.run.lambda, "Overload penalty per unit (default: 10x mean arc cost)");
  add_search(ts_cmd, ts.search, false);
  ts_cmd->add_option("--m-list", ts.m_list, "Ascending training sizes")->capture_default_str();
  ts_cmd->add_option("--replicates", ts.replicates, "Replicates per training size")->capture_default_str();
  ts_cmd->add_option("--test-m", ts.test_m, "Size of the shared test set")->capture_default_str();
  ts_cmd->add_option("--base-seed", ts.base_seed, "Seed all experiment seeds derive from")->capture_default_str();
  ts_cmd->add_option("--prefix", ts.prefix, "Output prefix for .csv and .json")->capture_default_str();

  BudgetArgs bb;
  auto* budget_cmd = app.add_subcommand("bench-budget", "Anytime traces under equal wall-clock budgets");
  add_instance(budget_cmd, bb.inst);
  add_model(budget_cmd, bb.model);
  add_run(budget_cmd, bb.run, false);
  budget_cmd->add_option("--lambda", bb.run.lambda, "Overload penalty per unit (default: 10x mean arc cost)");
  add_search(budget_cmd, bb.search, false);
  budget_cmd->add_option("--seeds", bb.seeds, "Comma-separated search seeds")->capture_default_str();
  budget_cmd->add_option("--workers-list", bb.workers, "Comma-separated worker counts; 'max' for all")
      ->capture_default_str();
  budget_cmd->add_option("--grid-ms", bb.grid_ms, "Trace sampling step in milliseconds")->capture_default_str();
  budget_cmd->add_option("--prefix", bb.prefix, "Output prefix for the trace CSVs")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  resolved_config = app.get_subcommands().front()->config_to_str(true, false);
  auto check_workers = [](int w) {
    if (w < 0) throw UsageError("--workers must be nonnegative");
  };
  return guarded(
      [&]() -> int {
        if (gen_cmd->parsed()) {
          check_workers(gen.run.workers);
          cmd_gen(gen, out);
        } else if (eval_cmd->parsed()) {
          check_workers(ev.run.workers);
          return cmd_eval(ev, out, err);
        } else if (solve_cmd->parsed()) {
          check_workers(sv.run.workers);
          cmd_solve(sv, out);
        } else if (scaling_cmd->parsed()) {
          cmd_scaling(sc, out, err);
        } else if (ts_cmd->parsed()) {
          check_workers(ts.run.workers);
          cmd_trainsize(ts, out);
        } else if (budget_cmd->parsed()) {
          cmd_budget(bb, out);
        }
        return kOk;
      },
      err);
}

}  // namespace cvrpsd::cli
