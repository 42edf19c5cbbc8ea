// Serial reference kernels. split_batch must agree with these bit for bit.

#include <algorithm>

#include "cvrpsd/error.hpp"
#include "cvrpsd/split.hpp"
#include "split_detail.hpp"

namespace cvrpsd {

namespace {

void check_row(const GiantTour& tour, std::span<const std::uint16_t> tour_demands) {
  if (tour_demands.size() != tour.size()) {
    throw DataError("demand row has " + std::to_string(tour_demands.size()) + " entries, tour has " +
                    std::to_string(tour.size()));
  }
}

template <typename V>
SplitSolution scalar_impl(const GiantTour& tour, std::span<const std::uint16_t> q,
                          std::int64_t capacity, SplitMode mode) {
  const std::size_t n = tour.size();
  const detail::SegmentCosts<V> seg(tour, mode);
  constexpr V inf = detail::infinity<V>();
  std::vector<V> f(n + 1, inf);
  SplitSolution out;
  out.predecessors.assign(n + 1, kNoPredecessor);
  f[0] = V{};

  for (std::size_t i = 1; i <= n; ++i) {
    V best = inf;
    std::int32_t arg = kNoPredecessor;
    std::int64_t load = 0;
    for (std::size_t p = i; p-- > 0;) {
      load += q[p];
      V cand;
      if (mode.is_penalized()) {
        // Penalties only grow as p decreases and every other term is
        // nonnegative, so no earlier start can beat `best` once the penalty
        // alone exceeds it.
        const V pen = seg.penalty(load, capacity);
        if (pen > best) break;
        cand = (f[p] + seg.transition(p, i)) + pen;
      } else {
        if (load > capacity) break;
        cand = f[p] + seg.transition(p, i);
      }
      if (cand < best) {
        best = cand;
        arg = static_cast<std::int32_t>(p);
      }
    }
    f[i] = best;
    out.predecessors[i] = arg;
  }
  out.cost = detail::to_output(f[n]);
  return out;
}

template <typename V>
SplitSolution masked_impl(const GiantTour& tour, std::span<const std::int32_t> mask,
                          std::span<const std::uint16_t> q, std::int64_t capacity, SplitMode mode) {
  const std::size_t n = tour.size();
  const detail::SegmentCosts<V> seg(tour, mode);
  constexpr V inf = detail::infinity<V>();
  std::vector<std::int64_t> prefix(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + q[k];

  std::vector<V> f(n + 1, inf);
  SplitSolution out;
  out.predecessors.assign(n + 1, kNoPredecessor);
  f[0] = V{};

  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t begin = 0;
    if (!mode.is_penalized()) {
      const std::int32_t m = mask[i - 1];
      begin = m == kInfeasibleMask ? i : static_cast<std::size_t>(m);
    }
    V best = inf;
    std::int32_t arg = kNoPredecessor;
    for (std::size_t p = begin; p < i; ++p) {
      V cand = f[p] + seg.transition(p, i);
      if (mode.is_penalized()) cand = cand + seg.penalty(prefix[i] - prefix[p], capacity);
      const bool take = cand <= best && cand < inf;
      best = take ? cand : best;
      arg = take ? static_cast<std::int32_t>(p) : arg;
    }
    f[i] = best;
    out.predecessors[i] = arg;
  }
  out.cost = detail::to_output(f[n]);
  return out;
}

template <typename V>
SplitSolution brute_impl(const GiantTour& tour, std::span<const std::uint16_t> q,
                         std::int64_t capacity, SplitMode mode) {
  const std::size_t n = tour.size();
  const detail::SegmentCosts<V> seg(tour, mode);
  constexpr V inf = detail::infinity<V>();

  V best = inf;
  std::vector<std::int32_t> best_starts;  // route start states, last route first
  std::vector<std::int32_t> starts;
  const std::uint64_t patterns = std::uint64_t{1} << (n - 1);
  for (std::uint64_t cuts = 0; cuts < patterns; ++cuts) {
    // Bit b set: a route ends after position b+1.
    V total{};
    bool feasible = true;
    std::size_t start = 0;
    starts.clear();
    for (std::size_t end = 1; end <= n; ++end) {
      const bool closes = end == n || ((cuts >> (end - 1)) & 1U);
      if (!closes) continue;
      std::int64_t load = 0;
      for (std::size_t k = start; k < end; ++k) load += q[k];
      if (mode.is_penalized()) {
        total = (total + seg.transition(start, end)) + seg.penalty(load, capacity);
      } else {
        if (load > capacity) {
          feasible = false;
          break;
        }
        total = total + seg.transition(start, end);
      }
      starts.push_back(static_cast<std::int32_t>(start));
      start = end;
    }
    if (!feasible) continue;
    std::reverse(starts.begin(), starts.end());
    // Prefer, among equal costs, the latest last-route start, then the latest
    // start before it, and so on.
    if (total < best || (total == best && starts > best_starts)) {
      best = total;
      best_starts = starts;
    }
  }

  SplitSolution out;
  out.cost = detail::to_output(best);
  out.predecessors.assign(n + 1, kNoPredecessor);
  if (out.feasible()) {
    std::size_t end = n;
    for (std::int32_t s : best_starts) {
      out.predecessors[end] = s;
      end = static_cast<std::size_t>(s);
    }
  }
  return out;
}

}  // namespace

SplitSolution split_scalar(const GiantTour& tour, std::span<const std::uint16_t> tour_demands,
                           std::int64_t capacity, SplitMode mode) {
  check_row(tour, tour_demands);
  return detail::dispatch_value_type(tour, mode, [&](auto v) {
    return scalar_impl<decltype(v)>(tour, tour_demands, capacity, mode);
  });
}

void compute_mask_row(std::span<const std::int64_t> prefix, std::int64_t capacity,
                      std::span<std::int32_t> mask) {
  if (prefix.size() != mask.size() + 1) throw DataError("prefix row must be one longer than mask row");
  const std::size_t n = mask.size();
  std::size_t p = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (prefix[i] - prefix[i - 1] > capacity) {
      mask[i - 1] = kInfeasibleMask;
      p = i;  // no feasible segment can span position i
      continue;
    }
    while (prefix[i] - prefix[p] > capacity) ++p;
    mask[i - 1] = static_cast<std::int32_t>(p);
  }
}

SplitSolution split_masked(const GiantTour& tour, std::span<const std::int32_t> mask,
                           std::span<const std::uint16_t> tour_demands, std::int64_t capacity,
                           SplitMode mode) {
  check_row(tour, tour_demands);
  if (mask.size() != tour.size()) throw DataError("mask row length does not match tour");
  return detail::dispatch_value_type(tour, mode, [&](auto v) {
    return masked_impl<decltype(v)>(tour, mask, tour_demands, capacity, mode);
  });
}

SplitSolution brute_force_split(const GiantTour& tour, std::span<const std::uint16_t> tour_demands,
                                std::int64_t capacity, SplitMode mode) {
  check_row(tour, tour_demands);
  if (tour.size() > kBruteForceMaxCustomers) {
    throw UsageError("brute-force split refused for n = " + std::to_string(tour.size()) +
                     " (limit " + std::to_string(kBruteForceMaxCustomers) + ")");
  }
  return detail::dispatch_value_type(tour, mode, [&](auto v) {
    return brute_impl<decltype(v)>(tour, tour_demands, capacity, mode);
  });
}

std::vector<std::vector<int>> recover_routes(std::span<const std::int32_t> predecessors,
                                             const GiantTour& tour) {
  const std::size_t n = tour.size();
  if (predecessors.size() != n + 1) throw InternalError("predecessor row has wrong length");
  std::vector<std::vector<int>> routes;
  std::size_t end = n;
  std::size_t steps = 0;
  while (end > 0) {
    const std::int32_t p = predecessors[end];
    if (p < 0 || static_cast<std::size_t>(p) >= end || ++steps > n) {
      throw InternalError("corrupt predecessor chain at state " + std::to_string(end));
    }
    std::vector<int> route;
    for (std::size_t k = static_cast<std::size_t>(p) + 1; k <= end; ++k) {
      route.push_back(tour.customer_at(k));
    }
    routes.push_back(std::move(route));
    end = static_cast<std::size_t>(p);
  }
  std::reverse(routes.begin(), routes.end());
  return routes;
}

}  // namespace cvrpsd
