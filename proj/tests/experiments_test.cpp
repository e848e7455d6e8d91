#include "precise/experiments.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace precise {
namespace {

constexpr double kTargetTruth = 0.8973;

double pool_truth(const Dataset& pool) {
  std::vector<double> phi;
  for (const auto& q : normalized_queries(pool)) phi.push_back(precision_at_k(q->gold_vector()));
  return oracle::naive_mean(phi);
}

double pool_mu(const Dataset& pool) {
  std::vector<double> mu;
  for (const auto& q : normalized_queries(pool)) mu.push_back(expected_metric_linear(query_probabilities(*q, {})));
  return oracle::naive_mean(mu);
}

TEST(SimulatePool, PerfectAnnotatorMatchesGold) {
  const Dataset pool = simulate_pool(500, 4, 0.6, AnnotatorProfile::perfect(), 1);
  for (const auto& q : pool.unlabeled) {
    ASSERT_EQ(expected_metric_linear(query_probabilities(q, {})), precision_at_k(q.gold_vector()));
  }
}

TEST(SimulatePool, RelevanceRateSetsTruth) {
  const Dataset pool = simulate_pool(60000, 4, kTargetTruth, AnnotatorProfile::preset("sharp", kTargetTruth), 8);
  EXPECT_EQ(pool.size(), 60000u);
  EXPECT_NEAR(pool_truth(pool), kTargetTruth, 0.005);
}

TEST(SimulatePool, SystematicShiftMovesAnnotatorMean) {
  AnnotatorProfile profile{ScoreDistribution::beta(6, 4), ScoreDistribution::beta(4, 6), 0.15, false};
  const Dataset pool = simulate_pool(20000, 4, 0.5, profile, 4);
  EXPECT_NEAR(pool_mu(pool) - pool_truth(pool), 0.15, 0.01);
}

TEST(SimulatePool, CalibratedProfileIsUnbiased) {
  const Dataset pool = simulate_pool(20000, 4, kTargetTruth, AnnotatorProfile::calibrated(kTargetTruth, 4.0), 4);
  EXPECT_NEAR(pool_mu(pool), pool_truth(pool), 0.005);
}

TEST(SimulatePool, DeterministicAndValidated) {
  const auto p = AnnotatorProfile::preset("moderate", 0.3);
  EXPECT_EQ(simulate_pool(50, 3, 0.3, p, 9), simulate_pool(50, 3, 0.3, p, 9));
  EXPECT_NE(simulate_pool(50, 3, 0.3, p, 9), simulate_pool(50, 3, 0.3, p, 10));
  EXPECT_THROW(simulate_pool(0, 3, 0.3, p, 9), std::invalid_argument);
  EXPECT_THROW(simulate_pool(5, 3, 1.3, p, 9), std::invalid_argument);
  AnnotatorProfile bad = p;
  bad.relevant = ScoreDistribution::beta(-1, 2);
  EXPECT_THROW(simulate_pool(5, 3, 0.3, bad, 9), std::invalid_argument);
  EXPECT_THROW(AnnotatorProfile::preset("nope", 0.3), std::invalid_argument);
}

TEST(SimulatePool, VerbalizedScoresUseTheScale) {
  auto profile = AnnotatorProfile::preset("separated", 0.5);
  profile.verbalize = true;
  const Dataset pool = simulate_pool(20, 2, 0.5, profile, 3);
  for (const auto& q : pool.unlabeled) {
    for (const auto& d : q.docs) ASSERT_TRUE(std::holds_alternative<VerbalVerdict>(d.annotation));
  }
  EXPECT_EQ(verbalize_score(0.93, {}), (VerbalVerdict{Verdict::Relevant, Confidence::HighlyLikely}));
  EXPECT_EQ(verbalize_score(0.02, {}), (VerbalVerdict{Verdict::Irrelevant, Confidence::AlmostCertain}));
}

TEST(RunResampling, SingleTrialStructure) {
  const Dataset pool = simulate_pool(40, 4, 0.5, AnnotatorProfile::preset("moderate", 0.5), 2);
  TrialConfig cfg;
  cfg.trials = 1;
  cfg.n_gold = 39;
  cfg.estimators = {EstimatorKind::GoldOnly};
  const auto rep = run_resampling(pool, cfg);
  ASSERT_EQ(rep.estimators.size(), 1u);
  EXPECT_EQ(rep.at(EstimatorKind::GoldOnly).estimates.size(), 1u);
  EXPECT_EQ(rep.N, 1u);
  EXPECT_EQ(rep.at(EstimatorKind::GoldOnly).std_error, 0.0);
  EXPECT_THROW(rep.at(EstimatorKind::LlmProb), std::out_of_range);
}

TEST(RunResampling, PreconditionsAreChecked) {
  const Dataset pool = simulate_pool(40, 4, 0.5, AnnotatorProfile::preset("moderate", 0.5), 2);
  TrialConfig cfg;
  cfg.n_gold = 40;
  EXPECT_THROW(run_resampling(pool, cfg), PreconditionError);
  cfg.n_gold = 10;
  cfg.n_unlabeled = 31;
  EXPECT_THROW(run_resampling(pool, cfg), PreconditionError);
  cfg.n_unlabeled.reset();
  cfg.k = 3;
  EXPECT_THROW(run_resampling(pool, cfg), PreconditionError);
  cfg.k = 4;
  cfg.trials = 0;
  EXPECT_THROW(run_resampling(pool, cfg), std::invalid_argument);
  Dataset unlabeled = pool;
  unlabeled.unlabeled[3].docs[1].gold_relevant.reset();
  cfg.trials = 2;
  EXPECT_THROW(run_resampling(unlabeled, cfg), InputError);
}

TEST(RunResampling, MatchesSplitGoldPipeline) {
  const Dataset pool = simulate_pool(300, 4, 0.7, AnnotatorProfile::preset("moderate", 0.7), 6);
  for (bool calibrate : {false, true}) {
    TrialConfig cfg;
    cfg.n_gold = 25;
    cfg.trials = 6;
    cfg.base_seed = 40;
    cfg.n_unlabeled = 200;
    cfg.calibrate = calibrate;
    const auto rep = run_resampling(pool, cfg);
    EXPECT_NEAR(rep.truth, pool_truth(pool), 1e-12);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      Dataset d = split_gold(pool, cfg.n_gold, cfg.base_seed + t);
      d.unlabeled.resize(200);
      EstimationConfig ec;
      ec.calibrate = calibrate;
      const auto r = run_estimators(d, ec);
      for (const auto& e : r.estimates) {
        ASSERT_NEAR(rep.at(e.estimator).estimates[t], e.value, 1e-12) << to_string(e.estimator) << " trial " << t;
      }
    }
  }
}

TEST(RunResampling, SummaryMatchesStoredEstimates) {
  const Dataset pool = simulate_pool(500, 4, 0.8, AnnotatorProfile::preset("sharp", 0.8), 6);
  TrialConfig cfg;
  cfg.trials = 40;
  const auto rep = run_resampling(pool, cfg);
  for (const auto& s : rep.estimators) {
    ASSERT_EQ(s.estimates.size(), 40u);
    EXPECT_NEAR(s.bias, (oracle::naive_mean(s.estimates) - rep.truth) * 100.0, 1e-12);
    EXPECT_NEAR(s.abs_bias, std::abs(s.bias), 1e-15);
    EXPECT_NEAR(s.std_error, std::sqrt(oracle::naive_variance(s.estimates)) * 100.0, 1e-12);
  }
}

TEST(RunResampling, DeterministicAcrossRunsAndWorkers) {
  const Dataset pool = simulate_pool(400, 4, 0.8, AnnotatorProfile::preset("sharp", 0.8), 6);
  TrialConfig cfg;
  cfg.trials = 30;
  cfg.calibrate = true;
  const auto a = run_resampling(pool, cfg);
  EXPECT_EQ(a, run_resampling(pool, cfg));
  cfg.workers = 4;
  const auto b = run_resampling(pool, cfg);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(a, b);
}

TEST(RunResampling, PerfectAnnotatorBeatsGold) {
  const Dataset pool = simulate_pool(3000, 4, 0.7, AnnotatorProfile::perfect(), 6);
  TrialConfig cfg;
  cfg.trials = 50;
  cfg.lambda_policy = LambdaPolicy::fixed(1.0);
  cfg.estimators = {EstimatorKind::GoldOnly, EstimatorKind::PrecisePpi};
  const auto rep = run_resampling(pool, cfg);
  EXPECT_LT(rep.at(EstimatorKind::PrecisePpi).std_error, rep.at(EstimatorKind::GoldOnly).std_error);
  // unlabeled means over 2970 of 3000 queries barely move
  EXPECT_LT(rep.at(EstimatorKind::PrecisePpi).std_error, 0.1);
}

TEST(RunResampling, HeterogeneousPoolGoldStandardError) {
  const Dataset pool =
      simulate_pool(60030, 4, kTargetTruth, AnnotatorProfile::preset("sharp", kTargetTruth), 21, 0.9);
  TrialConfig cfg;
  cfg.n_gold = 30;
  cfg.trials = 50;
  cfg.estimators = {EstimatorKind::GoldOnly};
  cfg.n_unlabeled = 1;
  const auto rep = run_resampling(pool, cfg);
  EXPECT_NEAR(rep.at(EstimatorKind::GoldOnly).std_error, 4.4, 1.5);
}

TEST(Ablation, StructureCostAndInvariants) {
  const Dataset pool = simulate_pool(10000, 4, 0.7, AnnotatorProfile::perfect(), 13);
  TrialConfig cfg;
  cfg.n_gold = 30;
  cfg.trials = 20;
  cfg.per_query_cost_usd = 0.01576;
  const std::vector<std::size_t> mult{10, 100, 300};
  const auto reps = ablate_unlabeled_size(pool, cfg, mult);
  ASSERT_EQ(reps.size(), 3u);
  EXPECT_EQ(reps[0].N, 300u);
  EXPECT_EQ(reps[1].N, 3000u);
  EXPECT_EQ(reps[2].N, 9000u);
  EXPECT_NEAR(reps[1].cost_usd, 47.28, 0.005);
  EXPECT_LT(reps[0].cost_usd, reps[1].cost_usd);
  EXPECT_LT(reps[1].cost_usd, reps[2].cost_usd);
  for (const auto& r : reps) {
    EXPECT_EQ(r.truth, reps[0].truth);
    EXPECT_EQ(r.at(EstimatorKind::GoldOnly).estimates, reps[0].at(EstimatorKind::GoldOnly).estimates);
    const auto& gold = r.at(EstimatorKind::GoldOnly);
    const auto& ppi = r.at(EstimatorKind::PrecisePpi);
    EXPECT_LE(ppi.abs_bias, gold.abs_bias + 2.0 * gold.std_error / std::sqrt(20.0));
    EXPECT_LT(ppi.std_error, gold.std_error);
  }
  EXPECT_EQ(reps, ablate_unlabeled_size(pool, cfg, mult));
}

TEST(Ablation, CapacityIsChecked) {
  const Dataset pool = simulate_pool(1000, 4, 0.7, AnnotatorProfile::perfect(), 13);
  TrialConfig cfg;
  const std::vector<std::size_t> too_big{10, 40};
  EXPECT_THROW(ablate_unlabeled_size(pool, cfg, too_big), PreconditionError);
  const std::vector<std::size_t> zero{0};
  EXPECT_THROW(ablate_unlabeled_size(pool, cfg, zero), std::invalid_argument);
}

TEST(CostReport, LinearModel) {
  EXPECT_NEAR(cost_report(60000, 0.01576), 945.62, 0.05);
  EXPECT_NEAR(cost_report(3000, 0.01576), 47.28, 1e-9);
  EXPECT_EQ(cost_report(0, 0.01576), 0.0);
  EXPECT_EQ(cost_report(3000, 0.01576), 0.05 * cost_report(60000, 0.01576));
  EXPECT_THROW(cost_report(10, -1.0), std::invalid_argument);
}

TEST(CalibrationDiagnostics, PointMassBin) {
  std::vector<LabeledScore> pairs(20, {0.9, true});
  pairs.push_back({0.1, false});
  const auto d = calibration_diagnostics(pairs, 0.1);
  ASSERT_EQ(d.bins.size(), 10u);
  EXPECT_EQ(d.bins[9].tp_count, 20u);
  EXPECT_EQ(d.bins[9].lo, 0.9);
  EXPECT_EQ(d.bins[9].hi, 1.0);
  EXPECT_EQ(d.bins[1].tn_count, 1u);
  EXPECT_EQ(*d.tp_fraction_ge_half, 1.0);
  EXPECT_EQ(*d.tn_fraction_le_040, 1.0);
}

TEST(CalibrationDiagnostics, MassAndEdges) {
  const std::vector<LabeledScore> pairs{{0.0, true}, {1.0, false}, {0.5, true}, {0.3, false}, {0.4, false}};
  const auto d = calibration_diagnostics(pairs, 0.25);
  ASSERT_EQ(d.bins.size(), 4u);
  std::size_t mass = 0;
  for (const auto& b : d.bins) mass += b.tp_count + b.tn_count;
  EXPECT_EQ(mass, pairs.size());
  EXPECT_EQ(d.bins[0].tp_count, 1u);
  EXPECT_EQ(d.bins[3].tn_count, 1u);
  EXPECT_EQ(d.bins[2].tp_count, 1u);
  EXPECT_NEAR(*d.tp_fraction_ge_half, 0.5, 1e-15);
  EXPECT_NEAR(*d.tn_fraction_le_040, 2.0 / 3.0, 1e-15);
  EXPECT_FALSE(calibration_diagnostics(std::vector<LabeledScore>{{0.2, false}}).tp_fraction_ge_half.has_value());
}

TEST(CalibrationDiagnostics, ProfileSeparation) {
  const auto sharp = split_gold(simulate_pool(2000, 4, 0.8973, AnnotatorProfile::preset("sharp", 0.8973), 1), 2000, 1);
  EXPECT_GT(*calibration_diagnostics(sharp).tp_fraction_ge_half, 0.9);
  const auto low = split_gold(simulate_pool(2000, 4, 0.8973, AnnotatorProfile::preset("low_recall", 0.8973), 1), 2000, 1);
  EXPECT_LE(*calibration_diagnostics(low).tp_fraction_ge_half, 0.6);
}

TEST(Serialization, ReportJsonAndCsv) {
  const Dataset pool = simulate_pool(200, 4, 0.8, AnnotatorProfile::preset("sharp", 0.8), 6);
  TrialConfig cfg;
  cfg.trials = 3;
  cfg.per_query_cost_usd = 0.01;
  const auto rep = run_resampling(pool, cfg);
  EXPECT_EQ(sampling_report_from_json(nlohmann::json::parse(to_json(rep).dump())), rep);

  std::ostringstream csv;
  write_estimates_csv(rep, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "estimator,trial,estimate");
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 12u);

  std::ostringstream hist;
  write_histogram_csv(calibration_diagnostics(split_gold(pool, 50, 1)), hist);
  EXPECT_EQ(hist.str().substr(0, hist.str().find('\n')), "bin_lo,bin_hi,tp_count,tn_count");
}

}  // namespace
}  // namespace precise
