#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "cvrpsd/error.hpp"
#include "cvrpsd/split.hpp"
#include "test_support.hpp"

namespace cvrpsd {
namespace {

using Row = std::vector<std::uint16_t>;

std::vector<std::int32_t> masks_of(const Row& tour_demands, std::int64_t capacity) {
  std::vector<std::int64_t> prefix(tour_demands.size() + 1, 0);
  for (std::size_t k = 0; k < tour_demands.size(); ++k) prefix[k + 1] = prefix[k] + tour_demands[k];
  std::vector<std::int32_t> mask(tour_demands.size());
  compute_mask_row(prefix, capacity, mask);
  return mask;
}

Row to_tour_order(const Row& by_customer, const GiantTour& tour) {
  Row out(tour.size());
  for (std::size_t k = 1; k <= tour.size(); ++k) {
    out[k - 1] = by_customer[static_cast<std::size_t>(tour.customer_at(k)) - 1];
  }
  return out;
}

TEST(Masks, Examples) {
  EXPECT_EQ(masks_of({14, 15, 8, 1, 8}, 17), (std::vector<std::int32_t>{0, 1, 2, 2, 2}));
  EXPECT_EQ(masks_of({8, 1, 5, 7, 2}, 17), (std::vector<std::int32_t>{0, 0, 0, 1, 1}));
}

TEST(Masks, OversizedCustomerIsFlagged) {
  EXPECT_EQ(masks_of({3, 20, 3}, 10), (std::vector<std::int32_t>{0, kInfeasibleMask, 2}));
}

TEST(Masks, MatchDefinitionOnRandomRows) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 1 + rng() % 25;
    const Row row = testing::random_row(n, 0, 40, rng);
    const std::int64_t cap = 1 + static_cast<std::int64_t>(rng() % 80);
    const auto mask = masks_of(row, cap);
    ASSERT_EQ(mask, testing::direct_masks(row, cap));
    std::int32_t prev = 0;
    for (std::size_t i = 1; i <= n; ++i) {
      if (mask[i - 1] == kInfeasibleMask) continue;
      EXPECT_LE(mask[i - 1], static_cast<std::int32_t>(i) - 1);
      EXPECT_GE(mask[i - 1], prev);
      prev = mask[i - 1];
    }
  }
}

TEST(SplitScalar, CollinearExample) {
  const auto inst = testing::line_instance({1, 2, 3}, 10);
  const auto tour = make_tour(inst, {1, 2, 3});
  const Row q{4, 5, 4};
  const auto sol = split_scalar(tour, q, 10, SplitMode::strict());
  EXPECT_EQ(sol.cost, 8.0);
  EXPECT_EQ(recover_routes(sol.predecessors, tour), (std::vector<std::vector<int>>{{1}, {2, 3}}));
  EXPECT_EQ(brute_force_split(tour, q, 10, SplitMode::strict()).cost, 8.0);
}

// Customer c sits at x = position of c in the tour (1,2,4,3,5).
struct WorkedExample : ::testing::Test {
  CvrpInstance inst = testing::line_instance({1, 2, 4, 3, 5}, 17);
  GiantTour tour = make_tour(inst, {1, 2, 4, 3, 5});
};

TEST_F(WorkedExample, FirstScenario) {
  const Row tour_q = to_tour_order({14, 15, 8, 1, 8}, tour);
  ASSERT_EQ(tour_q, (Row{14, 15, 1, 8, 8}));
  EXPECT_EQ(masks_of(tour_q, 17), (std::vector<std::int32_t>{0, 1, 1, 2, 2}));
  const auto sol = split_scalar(tour, tour_q, 17, SplitMode::strict());
  EXPECT_EQ(sol.cost, 16.0);
  EXPECT_EQ(recover_routes(sol.predecessors, tour), (std::vector<std::vector<int>>{{1}, {2}, {4, 3, 5}}));
}

TEST_F(WorkedExample, SecondScenario) {
  const Row tour_q = to_tour_order({8, 1, 5, 7, 2}, tour);
  const auto sol = split_scalar(tour, tour_q, 17, SplitMode::strict());
  EXPECT_EQ(sol.cost, 12.0);
  EXPECT_EQ(recover_routes(sol.predecessors, tour), (std::vector<std::vector<int>>{{1}, {2, 4, 3, 5}}));
}

TEST_F(WorkedExample, DemandsReadInTourOrderGiveTheSamePartition) {
  EXPECT_EQ(masks_of({14, 15, 8, 1, 8}, 17), (std::vector<std::int32_t>{0, 1, 2, 2, 2}));
  const auto sol = split_scalar(tour, Row{14, 15, 8, 1, 8}, 17, SplitMode::strict());
  EXPECT_EQ(sol.cost, 16.0);
  EXPECT_EQ(recover_routes(sol.predecessors, tour), (std::vector<std::vector<int>>{{1}, {2}, {4, 3, 5}}));
}

TEST_F(WorkedExample, BatchAgrees) {
  std::vector<std::uint16_t> data{14, 15, 8, 1, 8, 8, 1, 5, 7, 2};
  const DemandMatrixView view(data, 2, 5);
  SplitOptions opt;
  opt.record_predecessors = true;
  const auto res = split_batch(tour, view, 17, opt);
  EXPECT_EQ(res.cost, (std::vector<double>{16.0, 12.0}));
  EXPECT_EQ(recover_routes(res.predecessor_row(1), tour), (std::vector<std::vector<int>>{{1}, {2, 4, 3, 5}}));
}

TEST(SplitScalar, OversizedCustomerIsInfeasible) {
  const auto inst = testing::line_instance({1, 2}, 10);
  const auto tour = make_tour(inst, {1, 2});
  const auto sol = split_scalar(tour, Row{3, 11}, 10, SplitMode::strict());
  EXPECT_FALSE(sol.feasible());
  EXPECT_EQ(sol.cost, kInfeasibleCost);
  EXPECT_FALSE(split_masked(tour, masks_of({3, 11}, 10), Row{3, 11}, 10, SplitMode::strict()).feasible());
  EXPECT_FALSE(brute_force_split(tour, Row{3, 11}, 10, SplitMode::strict()).feasible());
}

TEST(SplitScalar, PenalizedChargesOverload) {
  const auto inst = testing::line_instance({1}, 10);
  const auto tour = make_tour(inst, {1});
  // Round trip 2 plus 3 per unit over capacity.
  EXPECT_EQ(split_scalar(tour, Row{12}, 10, SplitMode::penalized(3.0)).cost, 8.0);
  EXPECT_EQ(split_scalar(tour, Row{12}, 10, SplitMode::penalized(0.5)).cost, 3.0);
  EXPECT_EQ(split_scalar(tour, Row{9}, 10, SplitMode::penalized(3.0)).cost, 2.0);
}

TEST(SplitScalar, PenalizedMayMergeWhenCheaper) {
  // Two customers at x = 10; separate routes cost 40, merged costs 20 + 1*lambda.
  const auto inst = testing::line_instance({10, 10}, 5);
  const auto tour = make_tour(inst, {1, 2});
  EXPECT_EQ(split_scalar(tour, Row{3, 3}, 5, SplitMode::penalized(4.0)).cost, 24.0);
  EXPECT_EQ(split_scalar(tour, Row{3, 3}, 5, SplitMode::penalized(30.0)).cost, 40.0);
  EXPECT_EQ(split_scalar(tour, Row{3, 3}, 5, SplitMode::strict()).cost, 40.0);
}

TEST(SplitScalar, EqualCostTieGoesToLatestRouteStart) {
  // Everything at the depot: every partition costs zero.
  const auto inst = testing::line_instance({0, 0, 0}, 10);
  const auto tour = make_tour(inst, {1, 2, 3});
  const Row q{1, 1, 1};
  const auto expected = std::vector<std::vector<int>>{{1}, {2}, {3}};
  EXPECT_EQ(recover_routes(split_scalar(tour, q, 10, SplitMode::strict()).predecessors, tour), expected);
  EXPECT_EQ(recover_routes(split_masked(tour, masks_of(q, 10), q, 10, SplitMode::strict()).predecessors, tour),
            expected);
  EXPECT_EQ(recover_routes(brute_force_split(tour, q, 10, SplitMode::strict()).predecessors, tour), expected);
}

TEST(SplitScalar, BruteForceRefusesLargeTours) {
  const auto inst = make_synthetic_instance({.customers = 21});
  const auto tour = identity_tour(inst);
  EXPECT_THROW(brute_force_split(tour, Row(21, 1), 100, SplitMode::strict()), UsageError);
}

TEST(RecoverRoutes, RejectsCorruptChains) {
  const auto inst = testing::line_instance({1, 2, 3}, 10);
  const auto tour = make_tour(inst, {1, 2, 3});
  EXPECT_THROW(recover_routes(std::vector<std::int32_t>{-1, 0, 1, 3}, tour), InternalError);
  EXPECT_THROW(recover_routes(std::vector<std::int32_t>{-1, 0, 1}, tour), InternalError);
  EXPECT_THROW(recover_routes(std::vector<std::int32_t>{-1, 0, 1, -1}, tour), InternalError);
}

struct RandomCase {
  CvrpInstance inst;
  GiantTour tour;
  Row by_customer;
  Row tour_q;
  std::int64_t capacity;
};

RandomCase random_case(std::mt19937_64& rng, bool integral, std::size_t max_n) {
  const std::size_t n = 1 + rng() % max_n;
  const std::int64_t cap = 5 + static_cast<std::int64_t>(rng() % 40);
  auto inst = testing::random_matrix_instance(n, cap, integral, rng);
  auto tour = make_tour(inst, testing::random_order(n, rng));
  Row q = testing::random_row(n, 0, static_cast<int>(cap) + 3, rng);
  Row tq = to_tour_order(q, tour);
  return {std::move(inst), std::move(tour), std::move(q), std::move(tq), cap};
}

TEST(SplitProperties, KernelsAgreeWithExhaustiveOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 400; ++trial) {
    const bool integral = trial % 2 == 0;
    const auto c = random_case(rng, integral, 12);
    std::vector<int> demand(c.by_customer.begin(), c.by_customer.end());
    const double oracle = testing::exhaustive_partition_cost(c.inst, std::vector<int>(c.tour.order().begin(), c.tour.order().end()), demand);

    const auto scalar = split_scalar(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    const auto masked = split_masked(c.tour, masks_of(c.tour_q, c.capacity), c.tour_q, c.capacity, SplitMode::strict());
    const auto brute = brute_force_split(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    ASSERT_EQ(scalar.cost, masked.cost);
    ASSERT_EQ(scalar.cost, brute.cost);
    ASSERT_EQ(scalar.predecessors, masked.predecessors);
    if (scalar.feasible()) {
      ASSERT_EQ(recover_routes(scalar.predecessors, c.tour), recover_routes(brute.predecessors, c.tour));
    }
    if (std::isinf(oracle)) {
      ASSERT_FALSE(scalar.feasible());
      continue;
    }
    if (integral) {
      ASSERT_EQ(scalar.cost, oracle);
    } else {
      ASSERT_NEAR(scalar.cost, oracle, 1e-9 * oracle);
    }
    const auto routes = recover_routes(scalar.predecessors, c.tour);
    std::vector<int> flat;
    for (const auto& r : routes) {
      long load = 0;
      for (int cust : r) {
        load += c.by_customer[static_cast<std::size_t>(cust) - 1];
        flat.push_back(cust);
      }
      ASSERT_LE(load, c.capacity);
    }
    ASSERT_TRUE(std::ranges::equal(flat, c.tour.order()));
    ASSERT_NEAR(testing::route_set_cost(c.inst, routes), scalar.cost, 1e-9 * (1 + scalar.cost));
  }
}

TEST(SplitProperties, PenalizedKernelsAgreeAndBoundStrict) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 400; ++trial) {
    const auto c = random_case(rng, trial % 2 == 0, 12);
    const double lambda = trial % 3 == 0 ? static_cast<double>(rng() % 20) : 0.25 + (rng() % 1000) / 37.0;
    const auto mode = SplitMode::penalized(lambda);
    const auto scalar = split_scalar(c.tour, c.tour_q, c.capacity, mode);
    const auto masked = split_masked(c.tour, masks_of(c.tour_q, c.capacity), c.tour_q, c.capacity, mode);
    const auto brute = brute_force_split(c.tour, c.tour_q, c.capacity, mode);
    ASSERT_TRUE(scalar.feasible());
    ASSERT_EQ(scalar.cost, masked.cost);
    ASSERT_EQ(scalar.cost, brute.cost);
    ASSERT_EQ(scalar.predecessors, masked.predecessors);
    ASSERT_EQ(recover_routes(scalar.predecessors, c.tour), recover_routes(brute.predecessors, c.tour));
    const auto strict = split_scalar(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    ASSERT_LE(scalar.cost, strict.cost);
  }
}

TEST(SplitProperties, StrictCostIsMonotoneInDemand) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    auto c = random_case(rng, trial % 2 == 0, 15);
    const auto before = split_scalar(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    const std::size_t k = rng() % c.tour_q.size();
    c.tour_q[k] = static_cast<std::uint16_t>(c.tour_q[k] + 1 + rng() % 5);
    const auto after = split_scalar(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    ASSERT_GE(after.cost, before.cost);
  }
}

TEST(SplitProperties, RelaxingCapacityNeverHurts) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto c = random_case(rng, trial % 2 == 0, 15);
    const auto tight = split_scalar(c.tour, c.tour_q, c.capacity, SplitMode::strict());
    const auto loose = split_scalar(c.tour, c.tour_q, c.capacity + 1 + static_cast<std::int64_t>(rng() % 10), SplitMode::strict());
    ASSERT_LE(loose.cost, tight.cost);
  }
}

TEST(SplitBatch, BitIdenticalAcrossTilesAndWorkers) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const bool integral = trial % 2 == 0;
    const std::size_t n = 1 + rng() % 40;
    const std::size_t m = 1 + rng() % 300;
    const std::int64_t cap = 20 + static_cast<std::int64_t>(rng() % 60);
    const auto inst = testing::random_matrix_instance(n, cap, integral, rng);
    const auto tour = make_tour(inst, testing::random_order(n, rng));
    std::vector<std::uint16_t> data(m * n);
    for (auto& q : data) q = static_cast<std::uint16_t>(rng() % (static_cast<std::uint64_t>(cap) / 2 + 2));
    const DemandMatrixView view(data, m, n);
    for (const SplitMode mode : {SplitMode::strict(), SplitMode::penalized(7.0), SplitMode::penalized(2.375)}) {
      std::vector<double> expected(m);
      std::vector<std::vector<std::int32_t>> preds(m);
      for (std::size_t w = 0; w < m; ++w) {
        const Row tq = to_tour_order(Row(view.row(w).begin(), view.row(w).end()), tour);
        auto sol = split_scalar(tour, tq, cap, mode);
        expected[w] = sol.cost;
        preds[w] = std::move(sol.predecessors);
      }
      for (std::size_t tile : {std::size_t{1}, std::size_t{7}, std::size_t{64}, kDefaultTileSize}) {
        for (int workers : {1, 2, 3}) {
          SplitOptions opt;
          opt.mode = mode;
          opt.tile_size = tile;
          opt.workers = workers;
          opt.record_predecessors = true;
          const auto res = split_batch(tour, view, cap, opt);
          ASSERT_EQ(res.cost.size(), m);
          for (std::size_t w = 0; w < m; ++w) {
            ASSERT_EQ(std::memcmp(&res.cost[w], &expected[w], sizeof(double)), 0)
                << "tile " << tile << " workers " << workers << " scenario " << w;
            ASSERT_TRUE(std::ranges::equal(res.predecessor_row(w), preds[w]));
          }
        }
      }
    }
  }
}

TEST(SplitBatch, ComputeMasksMatchesRowKernel) {
  std::mt19937_64 rng(6);
  PrefixMatrix prefix(200, 31);
  for (std::size_t w = 0; w < 200; ++w) {
    for (std::size_t k = 1; k <= 30; ++k) prefix(w, k) = prefix(w, k - 1) + static_cast<std::int64_t>(rng() % 30);
  }
  const auto masks = compute_masks(prefix, 45, 2);
  for (std::size_t w = 0; w < 200; ++w) {
    std::vector<std::int32_t> row(30);
    compute_mask_row(prefix.row(w), 45, row);
    ASSERT_TRUE(std::ranges::equal(masks.row(w), row));
  }
}

TEST(SplitBatch, RejectsBadArguments) {
  const auto inst = testing::line_instance({1, 2}, 10);
  const auto tour = make_tour(inst, {1, 2});
  std::vector<std::uint16_t> data{1, 2, 3};
  EXPECT_THROW(split_batch(tour, DemandMatrixView(data, 1, 3), 10), DataError);
  std::vector<std::uint16_t> ok{1, 2};
  SplitOptions zero_tile;
  zero_tile.tile_size = 0;
  EXPECT_THROW(split_batch(tour, DemandMatrixView(ok, 1, 2), 10, zero_tile), UsageError);
  SplitOptions negative;
  negative.mode = SplitMode::penalized(-1.0);
  EXPECT_THROW(split_batch(tour, DemandMatrixView(ok, 1, 2), 10, negative), UsageError);
}

TEST(SplitBatch, IntegerKernelOnlyForIntegralInputs) {
  const auto integral = testing::line_instance({1, 2}, 10, Rounding::nearest_integer);
  const auto real = testing::line_instance({1.5, 2}, 10, Rounding::exact);
  std::vector<std::uint16_t> data{1, 2};
  const DemandMatrixView view(data, 1, 2);
  EXPECT_TRUE(split_batch(identity_tour(integral), view, 10).stats.integer_kernel);
  EXPECT_FALSE(split_batch(identity_tour(real), view, 10).stats.integer_kernel);
  SplitOptions frac;
  frac.mode = SplitMode::penalized(0.5);
  EXPECT_FALSE(split_batch(identity_tour(integral), view, 10, frac).stats.integer_kernel);
}

}  // namespace
}  // namespace cvrpsd
