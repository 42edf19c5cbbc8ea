#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <type_traits>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/split.hpp"

namespace cvrpsd::detail {

// DP values are int64 when every arc cost (and lambda) is integral, double
// otherwise. The integer sentinel leaves headroom so that sentinel + cost
// never overflows.
template <typename V>
constexpr V infinity() {
  if constexpr (std::is_floating_point_v<V>) {
    return std::numeric_limits<V>::infinity();
  } else {
    return std::numeric_limits<V>::max() / 4;
  }
}

template <typename V>
double to_output(V value) {
  return value >= infinity<V>() ? kInfeasibleCost : static_cast<double>(value);
}

inline bool integral_lambda(double lambda) {
  return lambda == std::floor(lambda) && std::abs(lambda) < 1e9;
}

inline bool use_integer_kernel(const GiantTour& tour, SplitMode mode) {
  return tour.integral_costs() && (!mode.is_penalized() || integral_lambda(mode.lambda));
}

// Tour-dependent part of every transition, 1-based like the recursion.
template <typename V>
struct SegmentCosts {
  std::vector<V> depart;
  std::vector<V> back;
  std::vector<V> chain;
  V lambda{};

  SegmentCosts(const GiantTour& tour, SplitMode mode) {
    const std::size_t n = tour.size();
    depart.resize(n + 1);
    back.resize(n + 1);
    chain.resize(n + 1);
    for (std::size_t k = 1; k <= n; ++k) {
      depart[k] = convert(tour.depart_cost(k));
      back[k] = convert(tour.return_cost(k));
      chain[k] = convert(tour.chain(k));
    }
    lambda = mode.is_penalized() ? convert(mode.lambda) : V{};
  }

  // Cost of one route serving positions p+1..i.
  V transition(std::size_t p, std::size_t i) const {
    return depart[p + 1] + (chain[i] - chain[p + 1]) + back[i];
  }

  V penalty(std::int64_t load, std::int64_t capacity) const {
    const std::int64_t over = load > capacity ? load - capacity : 0;
    return lambda * static_cast<V>(over);
  }

 private:
  static V convert(double v) {
    if constexpr (std::is_floating_point_v<V>) {
      return v;
    } else {
      return static_cast<V>(std::llround(v));
    }
  }
};

template <typename F>
decltype(auto) dispatch_value_type(const GiantTour& tour, SplitMode mode, F&& body) {
  if (use_integer_kernel(tour, mode)) return body(std::int64_t{});
  return body(double{});
}

}  // namespace cvrpsd::detail
