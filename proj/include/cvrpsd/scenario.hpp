#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cvrpsd/instance.hpp"
#include "cvrpsd/matrix.hpp"

namespace cvrpsd {

inline constexpr int kMaxDemand = 65535;

enum class DemandKind : std::uint8_t {
  fixed = 0,
  uniform_integer = 1,   // U{round(lo*nominal) .. round(hi*nominal)}
  truncated_normal = 2,  // round(clamp(N(nominal, cv*nominal), 0, 2*nominal))
  correlated = 3,        // round(nominal*(1 + rho*g + (1-rho)*eps)), g,eps ~ N(0, cv)
};

const char* to_string(DemandKind kind);
DemandKind demand_kind_from_string(const std::string& name);

/// Demand law for scenario generation. All demands are integers in
/// [0, kMaxDemand].
struct DemandModel {
  DemandKind kind = DemandKind::fixed;
  std::vector<int> nominal;  // customer-id order
  double lo_frac = 1.0;
  double hi_frac = 1.0;
  double cv = 0.0;
  double factor_weight = 0.0;
  std::uint64_t seed = 0;

  static DemandModel fixed(std::vector<int> nominal, std::uint64_t seed = 0);
  static DemandModel uniform(std::vector<int> nominal, double lo_frac, double hi_frac,
                             std::uint64_t seed);
  static DemandModel truncated_normal(std::vector<int> nominal, double cv, std::uint64_t seed);
  static DemandModel correlated(std::vector<int> nominal, double cv, double factor_weight,
                                std::uint64_t seed);

  /// Same law, different seed.
  DemandModel with_seed(std::uint64_t new_seed) const;
  std::string describe() const;
  void validate() const;

  friend bool operator==(const DemandModel&, const DemandModel&) = default;
};

/// Non-owning m x n view of customer-order demands.
class DemandMatrixView {
 public:
  DemandMatrixView() = default;
  DemandMatrixView(std::span<const std::uint16_t> data, std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const std::uint16_t> row(std::size_t r) const { return data_.subspan(r * cols_, cols_); }
  std::span<const std::uint16_t> data() const noexcept { return data_; }

  /// First `count` rows.
  DemandMatrixView head(std::size_t count) const;

 private:
  std::span<const std::uint16_t> data_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// m scenarios of realized demands, scenario-major. Immutable.
class ScenarioSet {
 public:
  ScenarioSet() = default;
  ScenarioSet(DemandModel model, std::size_t customers, std::vector<std::uint16_t> demands);

  std::size_t scenarios() const noexcept { return customers_ ? demands_.size() / customers_ : 0; }
  std::size_t customers() const noexcept { return customers_; }
  std::uint64_t seed() const noexcept { return model_.seed; }
  const DemandModel& model() const noexcept { return model_; }
  std::uint16_t q_max() const noexcept { return q_max_; }

  std::span<const std::uint16_t> row(std::size_t scenario) const {
    return std::span<const std::uint16_t>(demands_).subspan(scenario * customers_, customers_);
  }
  std::span<const std::uint16_t> demands() const noexcept { return demands_; }
  DemandMatrixView view() const { return {demands_, scenarios(), customers_}; }

  friend bool operator==(const ScenarioSet&, const ScenarioSet&) = default;

 private:
  DemandModel model_;
  std::size_t customers_ = 0;
  std::vector<std::uint16_t> demands_;
  std::uint16_t q_max_ = 0;
};

/// Draws m scenarios. Scenario w uses its own generator seeded from
/// (model.seed, w), so any prefix is independent of m and of `workers`.
ScenarioSet sample_scenarios(const DemandModel& model, std::size_t m, int workers = 0);

/// Scenario set with every row equal to `row`; handy for deterministic cases.
ScenarioSet replicate_scenario(std::span<const std::uint16_t> row, std::size_t m);

using TourDemandMatrix = RowMatrix<std::uint16_t>;
using PrefixMatrix = RowMatrix<std::int64_t>;

/// Row w, column k-1 holds the demand of the customer at tour position k.
TourDemandMatrix permute_to_tour_order(DemandMatrixView demands, const GiantTour& tour);

/// m x (n+1); S[w][0] = 0 and S[w][i] is the load of tour positions 1..i.
PrefixMatrix demand_prefix_sums(const TourDemandMatrix& tour_demands);

/// Binary scenario file; see README for the layout. Returns the CRC32 trailer.
std::uint32_t save_scenarios(const ScenarioSet& set, const std::filesystem::path& path);
ScenarioSet load_scenarios(const std::filesystem::path& path);

/// Exact byte size of the file save_scenarios would write.
std::uint64_t scenario_file_size(const DemandModel& model, std::size_t m, std::size_t n);

}  // namespace cvrpsd
