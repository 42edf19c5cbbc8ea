#pragma once

// Split of a giant tour into capacity-feasible routes, one scenario at a
// time (serial reference kernels) or for a whole scenario set at once
// (split_batch, OpenMP across scenarios).
//
// DP over states 0..n, state i = "positions 1..i served":
//   f(0) = 0
//   f(i) = min_p f(p) + c(0, s[p+1]) + D[i] - D[p+1] + c(s[i], n+1)
// where p ranges over the feasible last-route starts. In strict mode the
// feasible p form the window [mask(i), i-1] with mask(i) the earliest p whose
// segment load fits in Q. Penalized mode admits every p in [0, i-1] and adds
// lambda * max(0, load - Q).
//
// Ties between equal-cost predecessors go to the largest p.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/matrix.hpp"
#include "cvrpsd/scenario.hpp"

namespace cvrpsd {

/// Mask entry for a state whose own customer exceeds Q.
inline constexpr std::int32_t kInfeasibleMask = -1;
/// Predecessor entry for state 0 and for unreachable states.
inline constexpr std::int32_t kNoPredecessor = -1;
/// Cost reported for a scenario with no feasible split.
inline constexpr double kInfeasibleCost = std::numeric_limits<double>::infinity();

/// m x n; column i-1 holds mask(i).
using MaskMatrix = RowMatrix<std::int32_t>;

enum class Feasibility { strict, penalized };

struct SplitMode {
  Feasibility feasibility = Feasibility::strict;
  double lambda = 0.0;  ///< cost per unit of overload (penalized only)

  static SplitMode strict() { return {}; }
  static SplitMode penalized(double lambda) { return {Feasibility::penalized, lambda}; }
  bool is_penalized() const noexcept { return feasibility == Feasibility::penalized; }
};

/// One scenario's optimum. predecessors has n+1 entries; entry i is the
/// last state before the route ending at position i.
struct SplitSolution {
  double cost = kInfeasibleCost;
  std::vector<std::int32_t> predecessors;

  bool feasible() const noexcept { return cost != kInfeasibleCost; }
};

// --- serial reference kernels ----------------------------------------------

/// Direct recursion: scans candidate p downward and stops once the segment
/// load exceeds Q. `tour_demands` is in tour order.
SplitSolution split_scalar(const GiantTour& tour, std::span<const std::uint16_t> tour_demands,
                           std::int64_t capacity, SplitMode mode);

/// Two-pointer sweep over one prefix row (length n+1) writing n masks.
void compute_mask_row(std::span<const std::int64_t> prefix, std::int64_t capacity,
                      std::span<std::int32_t> mask);

/// Branch-free recursion over the precomputed window [mask(i), i-1].
SplitSolution split_masked(const GiantTour& tour, std::span<const std::int32_t> mask,
                           std::span<const std::uint16_t> tour_demands, std::int64_t capacity,
                           SplitMode mode);

inline constexpr std::size_t kBruteForceMaxCustomers = 20;

/// Exhaustive enumeration of all 2^(n-1) contiguous partitions. Verification
/// oracle only; refuses n > kBruteForceMaxCustomers.
SplitSolution brute_force_split(const GiantTour& tour, std::span<const std::uint16_t> tour_demands,
                                std::int64_t capacity, SplitMode mode);

/// Customer ids of each route, in tour order.
std::vector<std::vector<int>> recover_routes(std::span<const std::int32_t> predecessors,
                                             const GiantTour& tour);

// --- data-parallel kernels -------------------------------------------------

/// Masks for every row of `prefix`, rows in parallel.
MaskMatrix compute_masks(const PrefixMatrix& prefix, std::int64_t capacity, int workers = 0);

inline constexpr std::size_t kDefaultTileSize = 65536;

struct SplitOptions {
  SplitMode mode{};
  std::size_t tile_size = kDefaultTileSize;
  int workers = 0;  ///< 0: OpenMP default
  bool record_predecessors = false;
};

struct SplitStats {
  double wall_ms = 0.0;
  std::size_t tiles = 0;
  int workers = 0;
  bool integer_kernel = false;
};

struct SplitBatchResult {
  std::vector<double> cost;                 ///< length m, kInfeasibleCost when infeasible
  RowMatrix<std::int32_t> predecessors;     ///< m x (n+1) when requested, else empty
  SplitStats stats;

  std::span<const std::int32_t> predecessor_row(std::size_t scenario) const {
    return predecessors.row(scenario);
  }
};

/// Splits `tour` under every scenario of `demands` (customer order). Output
/// is bit-identical to split_scalar per scenario, for any tile size and any
/// worker count.
SplitBatchResult split_batch(const GiantTour& tour, DemandMatrixView demands,
                             std::int64_t capacity, const SplitOptions& options = {});

}  // namespace cvrpsd
