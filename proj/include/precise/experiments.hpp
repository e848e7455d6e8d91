#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "precise/calibration.hpp"
#include "precise/dataset.hpp"
#include "precise/errors.hpp"
#include "precise/estimators.hpp"
#include "precise/metric.hpp"
#include "precise/stats.hpp"

namespace precise {

// ---------------------------------------------------------------------------
// Synthetic annotator
// ---------------------------------------------------------------------------

/// Label-conditional score distribution: Beta(a, b) or a point mass.
struct ScoreDistribution {
  enum class Kind { Beta, Constant };
  Kind kind = Kind::Beta;
  double a = 1.0;
  double b = 1.0;
  double value = 0.0;

  static ScoreDistribution beta(double a, double b) { return {Kind::Beta, a, b, 0.0}; }
  static ScoreDistribution constant(double v) { return {Kind::Constant, 1.0, 1.0, v}; }

  void validate() const {
    if (kind == Kind::Beta && !(a > 0.0 && b > 0.0)) throw std::invalid_argument("Beta parameters must be positive");
    if (kind == Kind::Constant && !(value >= 0.0 && value <= 1.0)) {
      throw std::invalid_argument("point-mass score must lie in [0,1]");
    }
  }

  double mean() const { return kind == Kind::Beta ? a / (a + b) : value; }

  template <class Rng>
  double sample(Rng& rng) const {
    if (kind == Kind::Constant) return value;
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double s = x + y;
    return s > 0.0 ? x / s : (a >= b ? 1.0 : 0.0);
  }

  friend bool operator==(const ScoreDistribution&, const ScoreDistribution&) = default;
};

struct AnnotatorProfile {
  ScoreDistribution relevant = ScoreDistribution::beta(8.0, 2.0);
  ScoreDistribution irrelevant = ScoreDistribution::beta(2.0, 8.0);
  double systematic_shift = 0.0;
  bool verbalize = false;  // emit verdict + confidence instead of a number

  void validate() const {
    relevant.validate();
    irrelevant.validate();
    if (!std::isfinite(systematic_shift)) throw std::invalid_argument("systematic shift must be finite");
  }

  /// Scores 1 for relevant docs and 0 for irrelevant ones.
  static AnnotatorProfile perfect() {
    return {ScoreDistribution::constant(1.0), ScoreDistribution::constant(0.0), 0.0, false};
  }

  /// Exactly calibrated at base rate `rate`: with marginal scores
  /// s ~ Beta(rate*c, (1-rate)*c) and labels ~ Bernoulli(s), the
  /// label-conditional scores are Beta(a+1, b) and Beta(a, b+1).
  /// Smaller `concentration` separates the classes more sharply.
  static AnnotatorProfile calibrated(double rate, double concentration) {
    if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("calibrated profile needs rate in (0,1)");
    if (!(concentration > 0.0)) throw std::invalid_argument("concentration must be positive");
    const double a = rate * concentration;
    const double b = (1.0 - rate) * concentration;
    return {ScoreDistribution::beta(a + 1.0, b), ScoreDistribution::beta(a, b + 1.0), 0.0, false};
  }

  /// Named presets: "perfect", "sharp" (calibrated, concentration 0.5),
  /// "moderate" (calibrated, concentration 2), "low_recall" (many relevant
  /// docs scored low) and "separated" (Beta(8,2) vs Beta(2,8)).
  static AnnotatorProfile preset(std::string_view name, double rate) {
    if (name == "perfect") return perfect();
    if (name == "sharp") return calibrated(rate, 0.5);
    if (name == "moderate") return calibrated(rate, 2.0);
    if (name == "low_recall") {
      return {ScoreDistribution::beta(2.0, 3.0), ScoreDistribution::beta(1.0, 6.0), 0.0, false};
    }
    if (name == "separated") return {};
    throw std::invalid_argument("unknown annotator profile '" + std::string(name) + "'");
  }
};

/// Nearest verbal verdict for a numeric score under `scale`.
inline VerbalVerdict verbalize_score(double s, const ConfidenceScale& scale) {
  const Verdict v = s >= 0.5 ? Verdict::Relevant : Verdict::Irrelevant;
  const double target = v == Verdict::Relevant ? s : 1.0 - s;
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumConfidenceLevels; ++i) {
    if (std::abs(scale.scores()[i] - target) < std::abs(scale.scores()[best] - target)) best = i;
  }
  return {v, static_cast<Confidence>(best)};
}

/// Synthetic fully labeled pool. Each doc is relevant with probability
/// `relevance_rate` (or, when `query_concentration` > 0, with a per-query
/// rate drawn from Beta(rate*c, (1-rate)*c), which correlates relevance
/// within a query); the annotator score is drawn from the label-conditional
/// distribution, shifted, and clamped to [0,1].
inline Dataset simulate_pool(std::size_t num_queries, std::size_t k, double relevance_rate,
                             const AnnotatorProfile& profile, std::uint64_t seed, double query_concentration = 0.0,
                             const ConfidenceScale& scale = {}) {
  if (num_queries < 1) throw std::invalid_argument("simulate_pool: num_queries must be >= 1");
  if (k < 1) throw std::invalid_argument("simulate_pool: k must be >= 1");
  if (!(relevance_rate >= 0.0 && relevance_rate <= 1.0)) throw std::invalid_argument("relevance_rate must lie in [0,1]");
  if (!(query_concentration >= 0.0)) throw std::invalid_argument("query_concentration must be >= 0");
  profile.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t width = std::to_string(num_queries).size();
  const bool heterogeneous = query_concentration > 0.0 && relevance_rate > 0.0 && relevance_rate < 1.0;
  const auto query_rate =
      ScoreDistribution::beta(relevance_rate * query_concentration, (1.0 - relevance_rate) * query_concentration);

  Dataset pool;
  pool.k = k;
  pool.unlabeled.reserve(num_queries);
  for (std::size_t i = 0; i < num_queries; ++i) {
    std::ostringstream id;
    id << 'q' << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
    QueryInstance q{id.str(), Split::Unlabeled, {}};
    q.docs.reserve(k);
    const double rate = heterogeneous ? query_rate.sample(rng) : relevance_rate;
    for (std::size_t r = 0; r < k; ++r) {
      const bool rel = unif(rng) < rate;
      const double score =
          std::clamp((rel ? profile.relevant : profile.irrelevant).sample(rng) + profile.systematic_shift, 0.0, 1.0);
      RankedDoc d;
      d.doc_id = q.query_id + "-d" + std::to_string(r + 1);
      d.rank = static_cast<int>(r + 1);
      if (profile.verbalize) {
        d.annotation = verbalize_score(score, scale);
      } else {
        d.annotation = score;
      }
      d.gold_relevant = rel;
      q.docs.push_back(std::move(d));
    }
    pool.unlabeled.push_back(std::move(q));
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Cost model and calibration diagnostics
// ---------------------------------------------------------------------------

inline double cost_report(std::size_t N, double per_query_cost_usd) {
  if (!(per_query_cost_usd >= 0.0)) throw std::invalid_argument("per-query cost must be non-negative");
  return static_cast<double>(N) * per_query_cost_usd;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t tp_count = 0;
  std::size_t tn_count = 0;
  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

struct CalibrationDiagnostics {
  double bin_width = 0.1;
  std::vector<HistogramBin> bins;
  std::size_t tp_total = 0;
  std::size_t tn_total = 0;
  std::optional<double> tp_fraction_ge_half;     // relevant docs scored >= 0.5
  std::optional<double> tn_fraction_le_040;      // irrelevant docs scored <= 0.4
  friend bool operator==(const CalibrationDiagnostics&, const CalibrationDiagnostics&) = default;
};

/// Score histograms split by gold label. Bins are [i*w, (i+1)*w); the last
/// bin is closed at 1.
inline CalibrationDiagnostics calibration_diagnostics(std::span<const LabeledScore> pairs, double bin_width = 0.1) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw std::invalid_argument("bin width must lie in (0,1]");
  constexpr double eps = 1e-9;
  const double inv = 1.0 / bin_width;
  const bool exact = std::abs(inv - std::round(inv)) < eps;
  const auto count = static_cast<std::size_t>(exact ? std::round(inv) : std::ceil(inv));

  CalibrationDiagnostics d;
  d.bin_width = bin_width;
  d.bins.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    // i / count keeps edges such as 0.3 exact when 1/w is integral.
    d.bins[i].lo = exact ? static_cast<double>(i) / static_cast<double>(count) : static_cast<double>(i) * bin_width;
    d.bins[i].hi = exact ? static_cast<double>(i + 1) / static_cast<double>(count)
                         : std::min(1.0, static_cast<double>(i + 1) * bin_width);
  }
  std::size_t tp_high = 0, tn_low = 0;
  for (const auto& p : pairs) {
    if (!(p.raw >= 0.0 && p.raw <= 1.0)) throw std::invalid_argument("diagnostic scores must lie in [0,1]");
    const auto idx = std::min(count - 1, static_cast<std::size_t>(std::floor(p.raw / bin_width + eps)));
    if (p.relevant) {
      ++d.bins[idx].tp_count;
      ++d.tp_total;
      if (p.raw >= 0.5) ++tp_high;
    } else {
      ++d.bins[idx].tn_count;
      ++d.tn_total;
      if (p.raw <= 0.4) ++tn_low;
    }
  }
  if (d.tp_total) d.tp_fraction_ge_half = static_cast<double>(tp_high) / static_cast<double>(d.tp_total);
  if (d.tn_total) d.tn_fraction_le_040 = static_cast<double>(tn_low) / static_cast<double>(d.tn_total);
  return d;
}

/// Diagnostics over the gold-labeled docs of all gold queries.
inline CalibrationDiagnostics calibration_diagnostics(const Dataset& d, double bin_width = 0.1,
                                                      const ConfidenceScale& scale = {}) {
  const auto pairs = labeled_scores(d.gold, scale);
  return calibration_diagnostics(pairs, bin_width);
}

// ---------------------------------------------------------------------------
// Resampling harness
// ---------------------------------------------------------------------------

struct TrialConfig {
  std::size_t n_gold = 30;
  std::size_t trials = 50;
  std::uint64_t base_seed = 0;
  std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
  LambdaPolicy lambda_policy = LambdaPolicy::analytic();
  std::size_t k = 4;
  double level = 0.95;
  bool calibrate = false;
  double bin_threshold = 0.5;
  std::optional<std::size_t> n_unlabeled;  // default: every non-gold query
  double per_query_cost_usd = 0.0;
  std::size_t workers = 1;
  MetricFn metric = precision_at_k_metric();
  ConfidenceScale scale;

  void validate() const {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (n_gold < 2) throw std::invalid_argument("n_gold must be >= 2");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
    if (estimators.empty()) throw std::invalid_argument("no estimators requested");
  }
};

struct EstimatorSummary {
  EstimatorKind estimator = EstimatorKind::GoldOnly;
  std::vector<double> estimates;  // raw per-trial values (fractions)
  double bias = 0.0;              // mean estimate - truth, percentage points
  double abs_bias = 0.0;
  double std_error = 0.0;         // std of estimates across trials, percentage points
  std::optional<double> coverage; // fraction of trials whose CI covers the truth
  friend bool operator==(const EstimatorSummary&, const EstimatorSummary&) = default;
};

struct SamplingReport {
  double truth = 0.0;
  std::size_t n = 0;
  std::size_t N = 0;
  std::size_t trials = 0;
  double cost_usd = 0.0;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(EstimatorKind kind) const {
    for (const auto& e : estimators) {
      if (e.estimator == kind) return e;
    }
    throw std::out_of_range("estimator not present in report");
  }
  friend bool operator==(const SamplingReport&, const SamplingReport&) = default;
};

/// Bias, absolute bias and std error (percentage points) of `estimates`.
inline void summarize(EstimatorSummary& s, double truth) {
  const double m = stats::mean(s.estimates);
  s.bias = (m - truth) * 100.0;
  s.abs_bias = std::abs(s.bias);
  s.std_error = s.estimates.size() >= 2 ? stats::standard_deviation(s.estimates) * 100.0 : 0.0;
}

namespace detail {

// Pool flattened in query_id order: per-doc raw probabilities, labels, and
// per-query metric values.
struct FlatPool {
  std::size_t queries = 0;
  std::size_t k = 0;
  std::vector<double> raw;           // queries * k
  std::vector<std::uint8_t> labels;  // queries * k
  std::vector<double> phi;
  std::vector<double> mu_raw;

  std::span<const double> probs(std::size_t q) const { return {raw.data() + q * k, k}; }
};

inline FlatPool flatten_pool(const Dataset& pool, const MetricFn& metric, const ConfidenceScale& scale) {
  const auto all = normalized_queries(pool);
  FlatPool f;
  f.queries = all.size();
  f.k = pool.k;
  f.raw.reserve(f.queries * f.k);
  f.labels.reserve(f.queries * f.k);
  f.phi.reserve(f.queries);
  f.mu_raw.reserve(f.queries);
  for (const auto* q : all) {
    if (!q->fully_labeled()) throw InputError("pool query lacks gold labels", std::nullopt, q->query_id);
    const BinaryVector y = q->gold_vector();
    for (std::size_t i = 0; i < f.k; ++i) {
      f.raw.push_back(raw_probability(q->docs[i].annotation, scale));
      f.labels.push_back(y[i] ? 1 : 0);
    }
    f.phi.push_back(metric.eval(y));
    f.mu_raw.push_back(expected_metric(metric, f.probs(f.phi.size() - 1)));
  }
  return f;
}

struct TrialResult {
  std::vector<double> values;
  std::vector<std::uint8_t> covered;  // 0/1, or 2 when no interval was available
};

inline TrialResult run_trial(const FlatPool& f, const TrialConfig& cfg, std::size_t N, std::uint64_t seed, double truth) {
  const auto order = seeded_permutation(f.queries, seed);
  const std::span<const std::size_t> gold_idx(order.data(), cfg.n_gold);
  const std::span<const std::size_t> unl_idx(order.data() + cfg.n_gold, N);

  std::optional<CalibrationMap> cal;
  if (cfg.calibrate) {
    std::vector<LabeledScore> pairs;
    pairs.reserve(cfg.n_gold * f.k);
    for (auto q : gold_idx) {
      for (std::size_t i = 0; i < f.k; ++i) pairs.push_back({f.raw[q * f.k + i], f.labels[q * f.k + i] != 0});
    }
    cal = fit_isotonic(pairs);
  }
  std::vector<double> buf(f.k);
  auto probs = [&](std::size_t q) -> std::span<const double> {
    if (!cal) return f.probs(q);
    for (std::size_t i = 0; i < f.k; ++i) buf[i] = cal->apply(f.raw[q * f.k + i]);
    return buf;
  };
  auto mu = [&](std::size_t q) { return cal ? expected_metric(cfg.metric, probs(q)) : f.mu_raw[q]; };

  std::vector<PerQueryStats> gold, unl;
  gold.reserve(gold_idx.size());
  unl.reserve(unl_idx.size());
  for (auto q : gold_idx) gold.push_back({{}, f.phi[q], mu(q)});
  for (auto q : unl_idx) unl.push_back({{}, std::nullopt, mu(q)});

  TrialResult r;
  for (auto kind : cfg.estimators) {
    Estimate e;
    switch (kind) {
      case EstimatorKind::GoldOnly: e = estimate_gold(gold, cfg.level); break;
      case EstimatorKind::LlmProb: e = estimate_llm_prob(unl, cfg.level); break;
      case EstimatorKind::LlmBin: {
        std::vector<std::vector<double>> bp;
        bp.reserve(unl_idx.size());
        for (auto q : unl_idx) {
          const auto p = probs(q);
          bp.emplace_back(p.begin(), p.end());
        }
        e = estimate_llm_bin(bp, cfg.bin_threshold, cfg.metric, cfg.level);
        break;
      }
      case EstimatorKind::PrecisePpi: e = estimate_precise_ppi(gold, unl, cfg.lambda_policy, cfg.level); break;
    }
    r.values.push_back(e.value);
    r.covered.push_back(e.ci ? (e.ci->lower <= truth && truth <= e.ci->upper ? 1 : 0) : 2);
  }
  return r;
}

}  // namespace detail

/// Repeats the gold/unlabeled split `cfg.trials` times (trial t uses the
/// split of `split_gold(pool, n_gold, base_seed + t)`), evaluates every
/// requested estimator, and summarizes against the full-pool truth. Output
/// does not depend on `cfg.workers`.
inline SamplingReport run_resampling(const Dataset& pool, const TrialConfig& cfg) {
  cfg.validate();
  if (pool.k != cfg.k) {
    throw PreconditionError("pool has K=" + std::to_string(pool.k) + " but the trial config requests K=" +
                            std::to_string(cfg.k));
  }
  if (pool.size() < cfg.n_gold + 1) {
    throw PreconditionError("pool of " + std::to_string(pool.size()) + " queries is too small for n_gold=" +
                            std::to_string(cfg.n_gold));
  }
  const std::size_t available = pool.size() - cfg.n_gold;
  const std::size_t N = cfg.n_unlabeled.value_or(available);
  if (N > available) {
    throw PreconditionError("requested " + std::to_string(N) + " unlabeled queries but only " +
                            std::to_string(available) + " remain after the gold split");
  }
  if (N < 1) throw PreconditionError("at least one unlabeled query is required");

  const detail::FlatPool flat = detail::flatten_pool(pool, cfg.metric, cfg.scale);
  const double truth = stats::mean(flat.phi);

  std::vector<detail::TrialResult> results(cfg.trials);
  std::vector<std::exception_ptr> errors(cfg.trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < cfg.trials; t = next++) {
      try {
        results[t] = detail::run_trial(flat, cfg, N, cfg.base_seed + t, truth);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, cfg.trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool_threads;
    pool_threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool_threads.emplace_back(worker);
    for (auto& th : pool_threads) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SamplingReport rep;
  rep.truth = truth;
  rep.n = cfg.n_gold;
  rep.N = N;
  rep.trials = cfg.trials;
  rep.cost_usd = cost_report(N, cfg.per_query_cost_usd);
  for (std::size_t j = 0; j < cfg.estimators.size(); ++j) {
    EstimatorSummary s;
    s.estimator = cfg.estimators[j];
    s.estimates.reserve(cfg.trials);
    std::size_t with_ci = 0, hits = 0;
    for (const auto& r : results) {
      s.estimates.push_back(r.values[j]);
      if (r.covered[j] != 2) {
        ++with_ci;
        hits += r.covered[j];
      }
    }
    summarize(s, truth);
    if (with_ci) s.coverage = static_cast<double>(hits) / static_cast<double>(with_ci);
    rep.estimators.push_back(std::move(s));
  }
  return rep;
}

/// One report per multiplier m, each using the first m * n_gold unlabeled
/// queries of every trial's split. Gold sets are identical across reports.
inline std::vector<SamplingReport> ablate_unlabeled_size(const Dataset& pool, const TrialConfig& cfg,
                                                         std::span<const std::size_t> multipliers) {
  cfg.validate();
  if (multipliers.empty()) throw std::invalid_argument("no ablation multipliers given");
  for (auto m : multipliers) {
    if (m < 1) throw std::invalid_argument("ablation multipliers must be >= 1");
    if (pool.size() < cfg.n_gold || m * cfg.n_gold > pool.size() - cfg.n_gold) {
      throw PreconditionError("multiplier " + std::to_string(m) + " needs " + std::to_string(m * cfg.n_gold) +
                              " unlabeled queries; pool has " +
                              std::to_string(pool.size() >= cfg.n_gold ? pool.size() - cfg.n_gold : 0));
    }
  }
  std::vector<SamplingReport> out;
  out.reserve(multipliers.size());
  for (auto m : multipliers) {
    TrialConfig c = cfg;
    c.n_unlabeled = m * cfg.n_gold;
    out.push_back(run_resampling(pool, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace detail {
inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
inline std::string number_text(double v) { return nlohmann::json(v).dump(); }
}  // namespace detail

inline nlohmann::json to_json(const SamplingReport& r) {
  nlohmann::json ests = nlohmann::json::array();
  for (const auto& e : r.estimators) {
    ests.push_back({{"estimator", std::string(to_string(e.estimator))},
                    {"bias", e.bias},
                    {"abs_bias", e.abs_bias},
                    {"std_error", e.std_error},
                    {"coverage", detail::optional_number(e.coverage)},
                    {"estimates", e.estimates}});
  }
  return {{"truth", r.truth}, {"n", r.n}, {"N", r.N}, {"trials", r.trials}, {"cost_usd", r.cost_usd},
          {"estimators", std::move(ests)}};
}

inline SamplingReport sampling_report_from_json(const nlohmann::json& j) {
  SamplingReport r;
  r.truth = j.at("truth").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.N = j.at("N").get<std::size_t>();
  r.trials = j.at("trials").get<std::size_t>();
  r.cost_usd = j.at("cost_usd").get<double>();
  for (const auto& ej : j.at("estimators")) {
    EstimatorSummary e;
    const auto kind = parse_estimator(ej.at("estimator").get<std::string>());
    if (!kind) throw InputError("unknown estimator in report");
    e.estimator = *kind;
    e.bias = ej.at("bias").get<double>();
    e.abs_bias = ej.at("abs_bias").get<double>();
    e.std_error = ej.at("std_error").get<double>();
    if (!ej.at("coverage").is_null()) e.coverage = ej["coverage"].get<double>();
    e.estimates = ej.at("estimates").get<std::vector<double>>();
    r.estimators.push_back(std::move(e));
  }
  return r;
}

/// `estimator,trial,estimate` rows.
inline void write_estimates_csv(const SamplingReport& r, std::ostream& out, bool header = true,
                                std::optional<std::size_t> multiplier = std::nullopt) {
  if (header) out << (multiplier ? "multiplier," : "") << "estimator,trial,estimate\n";
  for (const auto& e : r.estimators) {
    for (std::size_t t = 0; t < e.estimates.size(); ++t) {
      if (multiplier) out << *multiplier << ',';
      out << to_string(e.estimator) << ',' << t << ',' << detail::number_text(e.estimates[t]) << '\n';
    }
  }
}

inline nlohmann::json to_json(const CalibrationDiagnostics& d) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : d.bins) bins.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"tp_count", b.tp_count}, {"tn_count", b.tn_count}});
  return {{"bin_width", d.bin_width},
          {"tp_total", d.tp_total},
          {"tn_total", d.tn_total},
          {"tp_fraction_ge_0.5", detail::optional_number(d.tp_fraction_ge_half)},
          {"tn_fraction_le_0.4", detail::optional_number(d.tn_fraction_le_040)},
          {"histogram", std::move(bins)}};
}

/// `bin_lo,bin_hi,tp_count,tn_count` rows.
inline void write_histogram_csv(const CalibrationDiagnostics& d, std::ostream& out) {
  out << "bin_lo,bin_hi,tp_count,tn_count\n";
  for (const auto& b : d.bins) {
    out << detail::number_text(b.lo) << ',' << detail::number_text(b.hi) << ',' << b.tp_count << ',' << b.tn_count
        << '\n';
  }
}

}  // namespace precise
