#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cvrpsd {

/// How Euclidean distances are turned into arc costs.
enum class Rounding {
  exact,            ///< raw double distances
  nearest_integer,  ///< floor(d + 0.5), the TSPLIB EUC_2D convention
};

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Square matrix of arc costs over nodes 0..n+1. Node 0 is the departure
/// depot, node n+1 the return depot (same location), 1..n are customers.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t dim, std::vector<double> values);

  std::size_t dim() const noexcept { return dim_; }
  double operator()(std::size_t a, std::size_t b) const { return values_[a * dim_ + b]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

/// Euclidean costs for `coords` = depot followed by n customers. The returned
/// matrix has n+2 rows; the last row/column duplicates the depot.
CostMatrix build_cost_matrix(std::span<const Point> coords, Rounding rounding);

/// Deterministic CVRP data: cost matrix, capacity and nominal demands.
/// Immutable once built.
class CvrpInstance {
 public:
  /// `coords` holds the depot followed by the customers (n+1 points).
  static CvrpInstance from_coordinates(std::string name, std::vector<Point> coords,
                                       std::vector<int> nominal_demands, std::int64_t capacity,
                                       Rounding rounding = Rounding::exact);

  /// Explicit (n+2)x(n+2) matrix. With `integral` set, every entry must be
  /// an integer and the split kernels run on 64-bit integers.
  static CvrpInstance from_matrix(std::string name, CostMatrix cost,
                                  std::vector<int> nominal_demands, std::int64_t capacity,
                                  bool integral);

  const std::string& name() const noexcept { return name_; }
  std::size_t customers() const noexcept { return nominal_.size(); }
  std::size_t return_depot() const noexcept { return nominal_.size() + 1; }
  std::int64_t capacity() const noexcept { return capacity_; }
  Rounding rounding() const noexcept { return rounding_; }
  bool integral_costs() const noexcept { return integral_; }
  bool has_coordinates() const noexcept { return !coords_.empty(); }

  double cost(std::size_t a, std::size_t b) const { return cost_(a, b); }
  const CostMatrix& costs() const noexcept { return cost_; }

  /// n+2 points; index n+1 repeats the depot. Empty for matrix instances.
  std::span<const Point> coords() const noexcept { return coords_; }

  /// Nominal demand of customer c is nominal_demands()[c - 1].
  std::span<const int> nominal_demands() const noexcept { return nominal_; }

  /// Mean cost over all ordered pairs of distinct nodes 0..n.
  double mean_arc_cost() const;

  friend bool operator==(const CvrpInstance&, const CvrpInstance&) = default;

 private:
  CvrpInstance() = default;
  void validate() const;

  std::string name_;
  std::vector<Point> coords_;
  CostMatrix cost_;
  std::vector<int> nominal_;
  std::int64_t capacity_ = 0;
  Rounding rounding_ = Rounding::exact;
  bool integral_ = false;
};

/// Parses a TSPLIB-style CVRP file (EUC_2D coordinates).
CvrpInstance parse_instance(std::string_view text, Rounding rounding = Rounding::exact);
CvrpInstance load_instance(const std::string& path, Rounding rounding = Rounding::exact);

/// Writes `instance` in the format read by parse_instance. Coordinates are
/// printed in shortest round-trip form so parsing reproduces them exactly.
std::string render_instance(const CvrpInstance& instance);

struct SyntheticOptions {
  std::size_t customers = 20;
  std::uint64_t seed = 1;
  int demand_lo = 1;
  int demand_hi = 30;
  double customers_per_route = 5.0;  ///< capacity = ceil(mean nominal * this)
  double grid = 1000.0;
  Rounding rounding = Rounding::exact;
};

/// Random uniform instance: depot at the grid centre, integer coordinates.
CvrpInstance make_synthetic_instance(const SyntheticOptions& options);

/// First-stage decision: a permutation of the customers with cached arc-cost
/// prefixes. Positions are 1-based in the accessors below, as in the split
/// recursion.
class GiantTour {
 public:
  std::size_t size() const noexcept { return order_.size(); }
  std::span<const int> order() const noexcept { return order_; }
  int customer_at(std::size_t position) const { return order_[position - 1]; }

  /// D[k-1] = sum of consecutive arc costs from position 1 to position k.
  std::span<const double> dist_prefix() const noexcept {
    return std::span<const double>(chain_).subspan(1);
  }
  double chain(std::size_t position) const { return chain_[position]; }
  double depart_cost(std::size_t position) const { return depart_[position]; }
  double return_cost(std::size_t position) const { return back_[position]; }
  bool integral_costs() const noexcept { return integral_; }

  friend bool operator==(const GiantTour&, const GiantTour&) = default;

 private:
  friend GiantTour make_tour(const CvrpInstance& instance, std::vector<int> order);

  std::vector<int> order_;
  std::vector<double> chain_;   // 1-based, chain_[1] = 0
  std::vector<double> depart_;  // 1-based, c(0, sigma_k)
  std::vector<double> back_;    // 1-based, c(sigma_k, n+1)
  bool integral_ = false;
};

/// Validates `order` as a permutation of 1..n and fills the cost caches.
GiantTour make_tour(const CvrpInstance& instance, std::vector<int> order);
GiantTour identity_tour(const CvrpInstance& instance);

}  // namespace cvrpsd
