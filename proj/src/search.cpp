#include "cvrpsd/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cvrpsd/error.hpp"

namespace cvrpsd {

using Clock = std::chrono::steady_clock;

void SearchConfig::validate() const {
  if (population_size < 2) throw UsageError("population size must be at least 2");
  if (offspring_per_generation < 1) throw UsageError("offspring per generation must be at least 1");
  if (!(elite_fraction >= 0.0 && elite_fraction <= 1.0)) throw UsageError("elite fraction must lie in [0, 1]");
  if (!(mutation_probability >= 0.0 && mutation_probability <= 1.0)) {
    throw UsageError("mutation probability must lie in [0, 1]");
  }
  if (!(time_budget >= 0.0)) throw UsageError("time budget must be nonnegative");
  if (time_budget == 0.0 && max_generations < 0) throw UsageError("search needs a time budget or a generation cap");
  if (screening_scenarios == 0) throw UsageError("screening subsample must be nonempty");
  if (tile_size == 0) throw UsageError("tile size must be at least 1");
}

double penalized_fitness(const GiantTour& tour, DemandMatrixView scenarios,
                         const CvrpInstance& instance, double lambda, int workers,
                         std::size_t tile_size) {
  SplitOptions options;
  options.mode = SplitMode::penalized(lambda);
  options.workers = workers;
  options.tile_size = tile_size;
  const auto result = split_batch(tour, scenarios, instance.capacity(), options);
  double sum = 0.0;
  for (double c : result.cost) sum += c;
  return sum / static_cast<double>(result.cost.size());
}

namespace {

double strict_mean(const GiantTour& tour, DemandMatrixView scenarios, const CvrpInstance& instance,
                   int workers, std::size_t tile_size) {
  SplitOptions options;
  options.workers = workers;
  options.tile_size = tile_size;
  const auto result = split_batch(tour, scenarios, instance.capacity(), options);
  double sum = 0.0;
  std::size_t feasible = 0;
  for (double c : result.cost) {
    if (c == kInfeasibleCost) continue;
    sum += c;
    ++feasible;
  }
  return feasible ? sum / static_cast<double>(feasible) : std::numeric_limits<double>::quiet_NaN();
}

bool expired(const Deadline& deadline) { return deadline && Clock::now() >= *deadline; }

bool improves(double candidate, double current) {
  return candidate < current - 1e-12 * std::max(1.0, std::abs(current));
}

std::vector<std::vector<int>> nearest_customers(const CvrpInstance& instance, std::size_t k) {
  const std::size_t n = instance.customers();
  k = std::min(k, n - 1);
  std::vector<std::vector<int>> out(n + 1);
  std::vector<int> others;
  for (std::size_t u = 1; u <= n; ++u) {
    others.clear();
    for (std::size_t v = 1; v <= n; ++v) {
      if (v != u) others.push_back(static_cast<int>(v));
    }
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k), others.end(),
                      [&](int a, int b) {
                        const double ca = instance.cost(u, static_cast<std::size_t>(a));
                        const double cb = instance.cost(u, static_cast<std::size_t>(b));
                        return ca != cb ? ca < cb : a < b;
                      });
    out[u].assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

enum class Move { relocate_after, relocate_before, swap, two_opt };

// Applies `move` for customers u, v; returns false when it is a no-op.
bool apply_move(Move move, std::vector<int>& order, std::size_t pu, std::size_t pv) {
  if (pu == pv) return false;
  switch (move) {
    case Move::relocate_after:
    case Move::relocate_before: {
      const int u = order[pu];
      const std::size_t target = move == Move::relocate_after ? pv + 1 : pv;
      if (target == pu || target == pu + 1) return false;
      order.erase(order.begin() + static_cast<std::ptrdiff_t>(pu));
      const std::size_t insert_at = target > pu ? target - 1 : target;
      order.insert(order.begin() + static_cast<std::ptrdiff_t>(insert_at), u);
      return true;
    }
    case Move::swap:
      std::swap(order[pu], order[pv]);
      return true;
    case Move::two_opt: {
      // Reverses the stretch after the earlier of u, v up to the later one,
      // making the two adjacent.
      const std::size_t lo = std::min(pu, pv) + 1;
      const std::size_t hi = std::max(pu, pv);
      if (hi <= lo) return false;
      std::reverse(order.begin() + static_cast<std::ptrdiff_t>(lo),
                   order.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
      return true;
    }
  }
  return false;
}

void random_mutation(std::vector<int>& order, std::mt19937_64& rng) {
  if (order.size() < 2) return;
  std::uniform_int_distribution<std::size_t> pick(0, order.size() - 1);
  const std::size_t a = pick(rng);
  std::size_t b = pick(rng);
  while (b == a) b = pick(rng);
  if (std::bernoulli_distribution(0.5)(rng)) {
    std::swap(order[a], order[b]);
  } else {
    const int u = order[a];
    order.erase(order.begin() + static_cast<std::ptrdiff_t>(a));
    order.insert(order.begin() + static_cast<std::ptrdiff_t>(std::min(b, order.size())), u);
  }
}

}  // namespace

std::vector<int> crossover_ox_slice(std::span<const int> parent_a, std::span<const int> parent_b,
                                    std::size_t first, std::size_t last) {
  const std::size_t n = parent_a.size();
  if (parent_b.size() != n) throw UsageError("parents differ in length");
  if (n == 0) return {};
  if (first > last || last >= n) throw UsageError("crossover slice out of range");
  std::vector<int> child(n, 0);
  std::vector<char> taken(n + 1, 0);
  for (std::size_t k = first; k <= last; ++k) {
    child[k] = parent_a[k];
    taken[static_cast<std::size_t>(parent_a[k])] = 1;
  }
  std::size_t write = (last + 1) % n;
  for (std::size_t step = 0; step < n; ++step) {
    const int c = parent_b[(last + 1 + step) % n];
    if (taken[static_cast<std::size_t>(c)]) continue;
    child[write] = c;
    write = (write + 1) % n;
  }
  return child;
}

std::vector<int> crossover_ox(std::span<const int> parent_a, std::span<const int> parent_b,
                              std::mt19937_64& rng) {
  const std::size_t n = parent_a.size();
  if (n == 0) return {};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t first = pick(rng);
  std::size_t last = pick(rng);
  if (first > last) std::swap(first, last);
  return crossover_ox_slice(parent_a, parent_b, first, last);
}

LocalSearchResult local_search(const GiantTour& tour, DemandMatrixView scenarios,
                               const CvrpInstance& instance, double lambda, std::mt19937_64& rng,
                               const LocalSearchOptions& options) {
  if (scenarios.rows() == 0) throw UsageError("local search needs at least one scenario");
  const std::size_t n = tour.size();
  auto evaluate = [&](const GiantTour& t) {
    return penalized_fitness(t, scenarios, instance, lambda, options.workers, options.tile_size);
  };

  LocalSearchResult out{tour, evaluate(tour), 0, 1};
  const std::size_t cap = options.move_cap < 0 ? 10 * n : static_cast<std::size_t>(options.move_cap);
  if (cap == 0 || n < 2) return out;

  std::vector<Move> moves;
  if (options.use_relocate) {
    moves.push_back(Move::relocate_after);
    moves.push_back(Move::relocate_before);
  }
  if (options.use_swap) moves.push_back(Move::swap);
  if (options.use_two_opt) moves.push_back(Move::two_opt);
  const auto neighbors = nearest_customers(instance, options.granular_neighbors);

  std::vector<int> current(tour.order().begin(), tour.order().end());
  std::vector<std::size_t> position(n + 1);
  auto reindex = [&] {
    for (std::size_t k = 0; k < n; ++k) position[static_cast<std::size_t>(current[k])] = k;
  };
  reindex();
  std::vector<int> customers(current);
  std::vector<int> candidate;

  bool improved = true;
  while (improved && out.moves < cap && !expired(options.deadline)) {
    improved = false;
    std::sort(customers.begin(), customers.end());
    std::shuffle(customers.begin(), customers.end(), rng);
    for (int u : customers) {
      bool moved = false;
      for (int v : neighbors[static_cast<std::size_t>(u)]) {
        for (Move move : moves) {
          candidate = current;
          if (!apply_move(move, candidate, position[static_cast<std::size_t>(u)],
                          position[static_cast<std::size_t>(v)])) {
            continue;
          }
          GiantTour next = make_tour(instance, candidate);
          const double fit = evaluate(next);
          ++out.evaluations;
          if (improves(fit, out.fitness)) {
            current.swap(candidate);
            reindex();
            out.tour = std::move(next);
            out.fitness = fit;
            ++out.moves;
            moved = improved = true;
            break;
          }
          if (expired(options.deadline)) return out;
        }
        if (moved) break;
      }
      if (out.moves >= cap || expired(options.deadline)) break;
    }
  }
  return out;
}

SearchResult solve(const CvrpInstance& instance, const ScenarioSet& train, const SearchConfig& config) {
  config.validate();
  if (train.scenarios() == 0) throw UsageError("training scenario set is empty");
  if (train.customers() != instance.customers()) {
    throw DataError("training scenarios have " + std::to_string(train.customers()) +
                    " customers, instance has " + std::to_string(instance.customers()));
  }
  const auto start = Clock::now();
  Deadline deadline;
  if (config.time_budget > 0.0) {
    deadline = start + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(config.time_budget));
  }
  const std::size_t n = instance.customers();
  const double lambda = config.lambda >= 0.0 ? config.lambda : 10.0 * instance.mean_arc_cost();
  const DemandMatrixView full = train.view();
  const DemandMatrixView screen = full.head(config.screening_scenarios);

  SearchResult result;
  result.lambda = lambda;
  std::mt19937_64 rng(config.seed);

  LocalSearchOptions ls;
  ls.use_relocate = config.use_relocate;
  ls.use_swap = config.use_swap;
  ls.use_two_opt = config.use_two_opt;
  ls.granular_neighbors = config.granular_neighbors;
  ls.move_cap = config.move_cap;
  ls.deadline = deadline;
  ls.workers = config.workers;
  ls.tile_size = config.tile_size;

  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };
  bool have_best = false;
  auto evaluate_full = [&](std::vector<int> order) {
    Individual ind;
    ind.tour = make_tour(instance, std::move(order));
    ind.fitness = penalized_fitness(ind.tour, full, instance, lambda, config.workers, config.tile_size);
    ind.eval_m = full.rows();
    ++result.evaluations;
    if (!have_best || ind.fitness < result.best.fitness) {
      have_best = true;
      result.best = ind;
      result.trace.push_back({elapsed_ms(), result.evaluations, ind.fitness,
                              strict_mean(ind.tour, full, instance, config.workers, config.tile_size)});
    }
    return ind;
  };
  auto educate = [&](std::vector<int> order) {
    if (expired(deadline)) return order;
    auto improved = local_search(make_tour(instance, std::move(order)), screen, instance, lambda, rng, ls);
    result.evaluations += improved.evaluations;
    return std::vector<int>(improved.tour.order().begin(), improved.tour.order().end());
  };

  std::vector<Individual> population;
  std::vector<int> base(n);
  std::iota(base.begin(), base.end(), 1);
  for (std::size_t k = 0; k < config.population_size; ++k) {
    if (!population.empty() && expired(deadline)) break;
    std::vector<int> order = base;
    std::shuffle(order.begin(), order.end(), rng);
    // The first tour is scored before education so the trace starts at once.
    if (k == 0) evaluate_full(order);
    population.push_back(evaluate_full(educate(std::move(order))));
  }

  auto tournament = [&]() -> const Individual& {
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    const Individual& a = population[pick(rng)];
    const Individual& b = population[pick(rng)];
    return b.fitness < a.fitness ? b : a;
  };
  auto by_fitness = [](const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness < b.fitness;
    return std::lexicographical_compare(a.tour.order().begin(), a.tour.order().end(),
                                        b.tour.order().begin(), b.tour.order().end());
  };

  std::bernoulli_distribution mutate(config.mutation_probability);
  while (!expired(deadline) &&
         (config.max_generations < 0 || result.generations < static_cast<std::size_t>(config.max_generations))) {
    std::vector<Individual> offspring;
    for (std::size_t c = 0; c < config.offspring_per_generation && !expired(deadline); ++c) {
      const Individual& pa = tournament();
      const Individual& pb = tournament();
      std::vector<int> child = crossover_ox(pa.tour.order(), pb.tour.order(), rng);
      if (mutate(rng)) random_mutation(child, rng);
      offspring.push_back(evaluate_full(educate(std::move(child))));
    }
    ++result.generations;

    // Survivors: elites by fitness, the rest by binary tournament among the
    // remaining distinct individuals.
    std::vector<Individual> pool = std::move(population);
    pool.insert(pool.end(), std::make_move_iterator(offspring.begin()),
                std::make_move_iterator(offspring.end()));
    std::sort(pool.begin(), pool.end(), by_fitness);
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const Individual& a, const Individual& b) {
                             return std::ranges::equal(a.tour.order(), b.tour.order());
                           }),
               pool.end());
    const std::size_t keep = std::min(config.population_size, pool.size());
    const auto elites = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(config.elite_fraction * static_cast<double>(config.population_size))),
        1, keep);
    population.assign(std::make_move_iterator(pool.begin()),
                      std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(elites)));
    std::vector<Individual> rest(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(elites)),
                                 std::make_move_iterator(pool.end()));
    while (population.size() < keep && !rest.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, rest.size() - 1);
      std::size_t a = pick(rng);
      const std::size_t b = pick(rng);
      if (rest[b].fitness < rest[a].fitness) a = b;
      population.push_back(std::move(rest[a]));
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(a));
    }
  }
  result.elapsed_ms = elapsed_ms();
  return result;
}

std::string trace_csv(std::span<const TraceEntry> trace) {
  std::ostringstream out;
  out.precision(17);
  out << "elapsed_ms,evaluations,best_penalized_cost,best_strict_cost\n";
  for (const auto& e : trace) {
    out << e.elapsed_ms << ',' << e.evaluations << ',' << e.best_penalized << ',' << e.best_strict << '\n';
  }
  return out.str();
}

}  // namespace cvrpsd
