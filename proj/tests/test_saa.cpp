#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cvrpsd/error.hpp"
#include "cvrpsd/saa.hpp"
#include "test_support.hpp"

namespace cvrpsd {
namespace {

std::vector<int> nominal_for(const CvrpInstance& inst) {
  return {inst.nominal_demands().begin(), inst.nominal_demands().end()};
}

TEST(Summarize, HandComputedMoments) {
  const std::vector<double> costs{1, 2, 3, 4};
  const auto est = summarize_costs(costs);
  EXPECT_EQ(est.m, 4u);
  EXPECT_DOUBLE_EQ(est.mean, 2.5);
  EXPECT_DOUBLE_EQ(est.variance, 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(est.std_error, std::sqrt(5.0 / 12.0));
  EXPECT_DOUBLE_EQ(est.ci_low, 2.5 - 1.96 * std::sqrt(5.0 / 12.0));
  EXPECT_DOUBLE_EQ(est.ci_high, 2.5 + 1.96 * std::sqrt(5.0 / 12.0));
  EXPECT_EQ(est.infeasible_count, 0u);
}

TEST(Summarize, InfeasibleScenariosAreCountedNotAveraged) {
  const std::vector<double> costs{2, kInfeasibleCost, 4};
  const auto est = summarize_costs(costs);
  EXPECT_DOUBLE_EQ(est.mean, 3.0);
  EXPECT_DOUBLE_EQ(est.variance, 2.0);
  EXPECT_EQ(est.infeasible_count, 1u);
  EXPECT_EQ(est.m, 3u);
  const std::vector<double> none{kInfeasibleCost, kInfeasibleCost};
  EXPECT_THROW(summarize_costs(none), DataError);
}

TEST(Summarize, FirstStageCostShiftsTheMean) {
  const std::vector<double> costs{3, 5};
  const auto est = summarize_costs(costs, 10.0);
  EXPECT_DOUBLE_EQ(est.mean, 14.0);
  EXPECT_DOUBLE_EQ(est.variance, 2.0);
}

TEST(Estimate, CollinearSingleScenario) {
  const auto inst = testing::line_instance({1, 2, 3}, 10);
  const auto tour = make_tour(inst, {1, 2, 3});
  const auto set = replicate_scenario(std::vector<std::uint16_t>{4, 5, 4}, 1);
  const auto est = estimate(tour, set.view(), inst, SplitMode::strict());
  EXPECT_EQ(est.mean, 8.0);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(Estimate, IdenticalScenariosHaveZeroStdError) {
  const auto inst = testing::line_instance({1, 2, 4, 3, 5}, 17);
  const auto tour = make_tour(inst, {1, 2, 4, 3, 5});
  const auto set = replicate_scenario(std::vector<std::uint16_t>{14, 15, 8, 1, 8}, 50);
  const auto est = estimate(tour, set.view(), inst, SplitMode::strict());
  EXPECT_EQ(est.mean, 16.0);
  EXPECT_EQ(est.std_error, 0.0);
  EXPECT_EQ(est.variance, 0.0);
}

TEST(Estimate, TwoScenarioMean) {
  const auto inst = testing::line_instance({1, 2, 4, 3, 5}, 17);
  const auto tour = make_tour(inst, {1, 2, 4, 3, 5});
  std::vector<std::uint16_t> data{14, 15, 8, 1, 8, 8, 1, 5, 7, 2};
  const auto est = estimate(tour, DemandMatrixView(data, 2, 5), inst, SplitMode::strict());
  EXPECT_EQ(est.mean, (16.0 + 12.0) / 2);
}

TEST(Estimate, FirstStageHook) {
  const auto inst = testing::line_instance({1, 2, 3}, 10);
  const auto tour = make_tour(inst, {1, 2, 3});
  const auto set = replicate_scenario(std::vector<std::uint16_t>{4, 5, 4}, 3);
  EstimateOptions opt;
  opt.first_stage_cost = [](const GiantTour& t) { return static_cast<double>(t.size()); };
  EXPECT_EQ(estimate(tour, set.view(), inst, SplitMode::strict(), opt).mean, 11.0);
}

TEST(Estimate, DimensionMismatchIsDataError) {
  const auto inst = testing::line_instance({1, 2, 3}, 10);
  const auto set = replicate_scenario(std::vector<std::uint16_t>{4, 5}, 3);
  EXPECT_THROW(estimate(identity_tour(inst), set.view(), inst, SplitMode::strict()), DataError);
}

// Integer costs make every per-scenario cost an integer, so the totals
// m * mean can be recovered exactly and compared without tolerance.
TEST(Estimate, ConcatenationMeanIsSizeWeighted) {
  const auto inst = make_synthetic_instance({.customers = 25, .seed = 3, .rounding = Rounding::nearest_integer});
  const auto model = DemandModel::uniform(nominal_for(inst), 0.5, 1.5, 99);
  const auto set = sample_scenarios(model, 5000);
  const auto tour = identity_tour(inst);
  const std::size_t ma = 1237;
  const auto all = estimate(tour, set.view(), inst, SplitMode::strict());
  const auto a = estimate(tour, set.view().head(ma), inst, SplitMode::strict());
  const DemandMatrixView tail(set.demands().subspan(ma * 25), 5000 - ma, 25);
  const auto b = estimate(tour, tail, inst, SplitMode::strict());
  ASSERT_EQ(all.infeasible_count + a.infeasible_count + b.infeasible_count, 0u);
  const auto total = [](const SaaEstimate& e) { return std::llround(static_cast<double>(e.m) * e.mean); };
  EXPECT_EQ(total(all), total(a) + total(b));
  EXPECT_EQ(all.mean, static_cast<double>(total(a) + total(b)) / 5000.0);

  const auto real = make_synthetic_instance({.customers = 25, .seed = 3});
  const auto rtour = identity_tour(real);
  const auto rall = estimate(rtour, set.view(), real, SplitMode::strict());
  const auto ra = estimate(rtour, set.view().head(ma), real, SplitMode::strict());
  const auto rb = estimate(rtour, tail, real, SplitMode::strict());
  const double weighted = (static_cast<double>(ma) * ra.mean + static_cast<double>(5000 - ma) * rb.mean) / 5000.0;
  EXPECT_NEAR(rall.mean, weighted, 1e-12 * rall.mean);
}

TEST(Estimate, SeedPrefixConsistency) {
  const auto inst = make_synthetic_instance({.customers = 15, .seed = 8});
  const auto model = DemandModel::truncated_normal(nominal_for(inst), 0.3, 17);
  const auto big = sample_scenarios(model, 3000);
  const auto small = sample_scenarios(model, 700);
  const auto tour = identity_tour(inst);
  const auto a = estimate(tour, big.view().head(700), inst, SplitMode::penalized(50.0));
  const auto b = estimate(tour, small.view(), inst, SplitMode::penalized(50.0));
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(OutOfSample, WarnsWhenEvaluatedOnItsTrainingSet) {
  const auto inst = make_synthetic_instance({.customers = 10, .seed = 2});
  const auto train = sample_scenarios(DemandModel::uniform(nominal_for(inst), 0.5, 1.5, 5), 100);
  const auto prov = ScenarioProvenance::of(train);
  const auto est = out_of_sample_eval(identity_tour(inst), train, inst, SplitMode::strict(), std::span(&prov, 1));
  EXPECT_EQ(est.kind, SampleKind::out_of_sample);
  ASSERT_EQ(est.warnings.size(), 1u);

  const auto test = sample_scenarios(train.model().with_seed(6), 100);
  EXPECT_TRUE(out_of_sample_eval(identity_tour(inst), test, inst, SplitMode::strict(), std::span(&prov, 1))
                  .warnings.empty());
}

TEST(OutOfSample, DisjointSetsAgreeWithinFourStdErrors) {
  const auto inst = make_synthetic_instance({.customers = 20, .seed = 12});
  const auto model = DemandModel::uniform(nominal_for(inst), 0.5, 1.5, 0);
  const auto tour = identity_tour(inst);
  const auto a = estimate(tour, sample_scenarios(model.with_seed(101), 100000).view(), inst, SplitMode::strict());
  const auto b = estimate(tour, sample_scenarios(model.with_seed(202), 100000).view(), inst, SplitMode::strict());
  EXPECT_LE(std::abs(a.mean - b.mean), 4.0 * std::hypot(a.std_error, b.std_error));
}

TEST(OutOfSample, DeterministicModelMatchesInSample) {
  const auto inst = make_synthetic_instance({.customers = 12, .seed = 1});
  const auto model = DemandModel::fixed(nominal_for(inst), 3);
  const auto tour = identity_tour(inst);
  const auto in = estimate(tour, sample_scenarios(model, 10).view(), inst, SplitMode::strict());
  const auto out = out_of_sample_eval(tour, sample_scenarios(model.with_seed(4), 1000), inst,
                                      SplitMode::strict(), {});
  EXPECT_EQ(in.mean, out.mean);
  EXPECT_EQ(out.std_error, 0.0);
}

TEST(Convergence, DeterministicModelHasZeroStdError) {
  const auto inst = make_synthetic_instance({.customers = 10, .seed = 1});
  const std::size_t grid[] = {1000, 10000, 100000};
  const auto rows = convergence_diagnostics(inst, DemandModel::fixed(nominal_for(inst), 1),
                                            identity_tour(inst), grid, SplitMode::strict());
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) EXPECT_EQ(r.std_error, 0.0);
}

TEST(Convergence, DoublingMShrinksStdErrorByRootTwo) {
  const auto inst = make_synthetic_instance({.customers = 20, .seed = 6});
  const std::size_t grid[] = {20000, 40000};
  const auto rows = convergence_diagnostics(inst, DemandModel::uniform(nominal_for(inst), 0.5, 1.5, 31),
                                            identity_tour(inst), grid, SplitMode::strict());
  const double ratio = rows[1].std_error / rows[0].std_error;
  EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.2 / std::sqrt(2.0));
}

SearchConfig quick_search() {
  SearchConfig s;
  s.population_size = 6;
  s.offspring_per_generation = 4;
  s.max_generations = 2;
  s.move_cap = 20;
  return s;
}

TEST(BiasExperiment, SingleRowReport) {
  const auto inst = make_synthetic_instance({.customers = 8, .seed = 5});
  BiasExperimentConfig cfg;
  cfg.m_list = {1};
  cfg.replicates = 1;
  cfg.test_m = 500;
  cfg.search = quick_search();
  const auto report = bias_experiment(inst, DemandModel::uniform(nominal_for(inst), 0.5, 1.5, 0), cfg);
  ASSERT_EQ(report.rows.size(), 1u);
  EXPECT_FALSE(report.rows[0].failed);
  EXPECT_NE(report.rows[0].train_seed, report.test_seed);
  const std::string csv = bias_report_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "m,replicate,train_seed,in_sample_mean,oos_mean,oos_stderr");
  EXPECT_NE(bias_report_json(report).find("\"test_seed\""), std::string::npos);
}

TEST(BiasExperiment, DeterministicModelGivesEqualCostForEveryM) {
  const auto inst = make_synthetic_instance({.customers = 8, .seed = 5});
  BiasExperimentConfig cfg;
  cfg.m_list = {1, 10, 50};
  cfg.replicates = 2;
  cfg.test_m = 200;
  cfg.search = quick_search();
  const auto report = bias_experiment(inst, DemandModel::fixed(nominal_for(inst)), cfg);
  ASSERT_EQ(report.rows.size(), 6u);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t k = 1; k < 3; ++k) {
      EXPECT_EQ(report.rows[r * 3 + k].oos_mean, report.rows[r * 3].oos_mean);
    }
  }
}

TEST(BiasExperiment, RejectsBadConfig) {
  const auto inst = make_synthetic_instance({.customers = 5});
  BiasExperimentConfig cfg;
  cfg.m_list = {100, 1};
  EXPECT_THROW(bias_experiment(inst, DemandModel::fixed(nominal_for(inst)), cfg), UsageError);
  cfg.m_list = {};
  EXPECT_THROW(bias_experiment(inst, DemandModel::fixed(nominal_for(inst)), cfg), UsageError);
}

TEST(DeriveSeed, DistinctTags) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 2000; ++tag) seen.insert(derive_seed(2024, tag));
  EXPECT_EQ(seen.size(), 2000u);
}

}  // namespace
}  // namespace cvrpsd
