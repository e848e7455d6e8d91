#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "precise/calibration.hpp"
#include "precise/dataset.hpp"
#include "precise/errors.hpp"
#include "precise/metric.hpp"
#include "precise/stats.hpp"

namespace precise {

/// Metric value under the gold labels (`phi`, gold queries only) and its
/// expectation under the annotator's distribution (`mu_tilde`).
struct PerQueryStats {
  std::string query_id;
  std::optional<double> phi;
  double mu_tilde = 0.0;
};

struct SplitStats {
  std::vector<PerQueryStats> gold;
  std::vector<PerQueryStats> unlabeled;
};

inline PerQueryStats query_stats(const QueryInstance& q, const MetricFn& metric, const ConfidenceScale& scale,
                                 const CalibrationMap* cal = nullptr) {
  PerQueryStats s;
  s.query_id = q.query_id;
  const auto p = query_probabilities(q, scale, cal);
  s.mu_tilde = expected_metric(metric, p);
  if (q.split == Split::Gold) s.phi = metric.eval(q.gold_vector());
  return s;
}

inline SplitStats per_query_stats(const Dataset& d, const MetricFn& metric, const ConfidenceScale& scale = {},
                                  const CalibrationMap* cal = nullptr) {
  SplitStats out;
  out.gold.reserve(d.gold.size());
  out.unlabeled.reserve(d.unlabeled.size());
  for (const auto& q : d.gold) out.gold.push_back(query_stats(q, metric, scale, cal));
  for (const auto& q : d.unlabeled) out.unlabeled.push_back(query_stats(q, metric, scale, cal));
  return out;
}

// ---------------------------------------------------------------------------
// Estimate types
// ---------------------------------------------------------------------------

enum class EstimatorKind { GoldOnly, LlmProb, LlmBin, PrecisePpi };

inline constexpr EstimatorKind kAllEstimators[] = {EstimatorKind::GoldOnly, EstimatorKind::LlmProb,
                                                   EstimatorKind::LlmBin, EstimatorKind::PrecisePpi};

inline std::string_view to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::GoldOnly: return "GoldOnly";
    case EstimatorKind::LlmProb: return "LlmProb";
    case EstimatorKind::LlmBin: return "LlmBin";
    case EstimatorKind::PrecisePpi: return "PrecisePpi";
  }
  return "?";
}

/// Accepts the canonical names and the short CLI aliases gold/prob/bin/ppi.
inline std::optional<EstimatorKind> parse_estimator(std::string_view s) {
  s = detail::trim(s);
  for (auto e : kAllEstimators) {
    if (detail::iequals(s, to_string(e))) return e;
  }
  if (detail::iequals(s, "gold")) return EstimatorKind::GoldOnly;
  if (detail::iequals(s, "prob")) return EstimatorKind::LlmProb;
  if (detail::iequals(s, "bin")) return EstimatorKind::LlmBin;
  if (detail::iequals(s, "ppi")) return EstimatorKind::PrecisePpi;
  return std::nullopt;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Estimate {
  EstimatorKind estimator = EstimatorKind::GoldOnly;
  double value = 0.0;
  double value_clamped = 0.0;
  std::optional<double> variance;  // absent when the sample is too small
  std::optional<Interval> ci;
  double level = 0.95;
  std::optional<double> lambda;
  std::size_t n = 0;
  std::size_t N = 0;
  std::vector<std::string> warnings;

  friend bool operator==(const Estimate&, const Estimate&) = default;
};

inline Interval confidence_interval(double value, double variance, double level) {
  if (!(variance >= 0.0)) throw std::invalid_argument("confidence_interval: negative variance");
  const double half = stats::two_sided_z(level) * std::sqrt(variance);
  return {value - half, value + half};
}

namespace detail {

inline Estimate make_estimate(EstimatorKind kind, double value, std::optional<double> variance, double level,
                              std::size_t n, std::size_t N) {
  Estimate e;
  e.estimator = kind;
  e.value = value;
  e.value_clamped = std::clamp(value, 0.0, 1.0);
  e.variance = variance;
  e.level = level;
  if (variance) e.ci = confidence_interval(value, *variance, level);
  e.n = n;
  e.N = N;
  return e;
}

inline std::vector<double> phis(std::span<const PerQueryStats> s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& q : s) {
    if (!q.phi) throw std::invalid_argument("gold stats entry '" + q.query_id + "' has no phi");
    out.push_back(*q.phi);
  }
  return out;
}

inline std::vector<double> mus(std::span<const PerQueryStats> s) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& q : s) out.push_back(q.mu_tilde);
  return out;
}

inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Mean of the gold metric values.
inline Estimate estimate_gold(std::span<const PerQueryStats> gold, double level = 0.95) {
  detail::check_level(level);
  if (gold.empty()) throw PreconditionError("gold-only estimate needs a non-empty gold set");
  const auto phi = detail::phis(gold);
  const std::size_t n = phi.size();
  std::optional<double> var;
  if (n >= 2) var = stats::variance(phi) / static_cast<double>(n);
  return detail::make_estimate(EstimatorKind::GoldOnly, stats::mean(phi), var, level, n, 0);
}

/// Mean annotator expectation over the unlabeled set, no gold correction.
inline Estimate estimate_llm_prob(std::span<const PerQueryStats> unlabeled, double level = 0.95) {
  detail::check_level(level);
  if (unlabeled.empty()) throw PreconditionError("annotator-only estimate needs a non-empty unlabeled set");
  const auto mu = detail::mus(unlabeled);
  const std::size_t N = mu.size();
  std::optional<double> var;
  if (N >= 2) var = stats::variance(mu) / static_cast<double>(N);
  return detail::make_estimate(EstimatorKind::LlmProb, stats::mean(mu), var, level, 0, N);
}

/// Metric on per-doc probabilities thresholded at `threshold` (>= is
/// relevant), averaged over unlabeled queries.
inline Estimate estimate_llm_bin(std::span<const std::vector<double>> unlabeled_probs, double threshold,
                                 const MetricFn& metric, double level = 0.95) {
  detail::check_level(level);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("bin threshold must lie in [0,1]");
  if (unlabeled_probs.empty()) throw PreconditionError("binarized estimate needs a non-empty unlabeled set");
  std::vector<double> values;
  values.reserve(unlabeled_probs.size());
  for (const auto& p : unlabeled_probs) {
    BinaryVector y(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) y.set(k, p[k] >= threshold);
    values.push_back(metric.eval(y));
  }
  const std::size_t N = values.size();
  std::optional<double> var;
  if (N >= 2) var = stats::variance(values) / static_cast<double>(N);
  return detail::make_estimate(EstimatorKind::LlmBin, stats::mean(values), var, level, 0, N);
}

inline Estimate estimate_llm_bin(const Dataset& d, double threshold, const MetricFn& metric, double level = 0.95,
                                 const ConfidenceScale& scale = {}, const CalibrationMap* cal = nullptr) {
  std::vector<std::vector<double>> probs;
  probs.reserve(d.unlabeled.size());
  for (const auto& q : d.unlabeled) probs.push_back(query_probabilities(q, scale, cal));
  return estimate_llm_bin(probs, threshold, metric, level);
}

// ---------------------------------------------------------------------------
// Lambda selection
// ---------------------------------------------------------------------------

struct LambdaPolicy {
  enum class Mode { Fixed, Analytic, GridSearch };
  Mode mode = Mode::Analytic;
  double value = 0.0;  // lambda for Fixed, step for GridSearch

  static LambdaPolicy fixed(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("fixed lambda must lie in [0,1]");
    return {Mode::Fixed, lambda};
  }
  static LambdaPolicy analytic() { return {Mode::Analytic, 0.0}; }
  static LambdaPolicy grid(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("grid step must lie in (0,1]");
    return {Mode::GridSearch, step};
  }

  /// "fixed:<v>", "analytic" or "grid:<step>".
  static LambdaPolicy parse(std::string_view s) {
    s = detail::trim(s);
    auto number = [&](std::string_view tail) {
      std::string t(tail);
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(t, &pos);
      } catch (const std::exception&) {
        throw std::invalid_argument("invalid lambda policy '" + std::string(s) + "'");
      }
      if (pos != t.size()) throw std::invalid_argument("invalid lambda policy '" + std::string(s) + "'");
      return v;
    };
    if (detail::iequals(s, "analytic")) return analytic();
    if (s.size() > 6 && detail::iequals(s.substr(0, 6), "fixed:")) return fixed(number(s.substr(6)));
    if (s.size() > 5 && detail::iequals(s.substr(0, 5), "grid:")) return grid(number(s.substr(5)));
    throw std::invalid_argument("invalid lambda policy '" + std::string(s) + "' (expected fixed:<v>|analytic|grid:<step>)");
  }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    switch (mode) {
      case Mode::Fixed: os << "fixed:" << value; break;
      case Mode::Analytic: os << "analytic"; break;
      case Mode::GridSearch: os << "grid:" << value; break;
    }
    return os.str();
  }

  friend bool operator==(const LambdaPolicy&, const LambdaPolicy&) = default;
};

/// Sample moments entering the PPI++ variance.
struct PpiMoments {
  std::size_t n = 0;
  std::size_t N = 0;
  double var_phi = 0.0;      // var_g(phi)
  double var_mu_gold = 0.0;  // var_g(mu_tilde)
  double cov_gold = 0.0;     // cov_g(phi, mu_tilde)
  double var_mu_unlabeled = 0.0;

  /// lambda^2 var_u/N + var_g(phi - lambda mu)/n.
  double variance(double lambda) const {
    const double rectifier = var_phi - 2.0 * lambda * cov_gold + lambda * lambda * var_mu_gold;
    return lambda * lambda * var_mu_unlabeled / static_cast<double>(N) +
           std::max(rectifier, 0.0) / static_cast<double>(n);
  }
};

inline PpiMoments ppi_moments(std::span<const PerQueryStats> gold, std::span<const PerQueryStats> unlabeled) {
  if (gold.size() < 2 || unlabeled.size() < 2) {
    throw PreconditionError("variance estimates need n >= 2 and N >= 2 (got n=" + std::to_string(gold.size()) +
                            ", N=" + std::to_string(unlabeled.size()) + ")");
  }
  const auto phi = detail::phis(gold);
  const auto mu_g = detail::mus(gold);
  const auto mu_u = detail::mus(unlabeled);
  PpiMoments m;
  m.n = gold.size();
  m.N = unlabeled.size();
  m.var_phi = stats::variance(phi);
  m.var_mu_gold = stats::variance(mu_g);
  m.cov_gold = stats::covariance(phi, mu_g);
  m.var_mu_unlabeled = stats::variance(mu_u);
  return m;
}

/// Plug-in variance of the PPI++ estimate at `lambda`, computed directly
/// from the rectifier residuals.
inline double ppi_plugin_variance(std::span<const PerQueryStats> gold, std::span<const PerQueryStats> unlabeled,
                                  double lambda) {
  if (gold.size() < 2 || unlabeled.size() < 2) throw PreconditionError("variance estimates need n >= 2 and N >= 2");
  std::vector<double> residual;
  residual.reserve(gold.size());
  for (const auto& q : gold) {
    if (!q.phi) throw std::invalid_argument("gold stats entry '" + q.query_id + "' has no phi");
    residual.push_back(*q.phi - lambda * q.mu_tilde);
  }
  const auto mu_u = detail::mus(unlabeled);
  return lambda * lambda * stats::variance(mu_u) / static_cast<double>(mu_u.size()) +
         stats::variance(residual) / static_cast<double>(residual.size());
}

namespace detail {

inline double grid_lambda(const PpiMoments& m, double step) {
  const auto points = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  double best_lambda = 0.0;
  double best = m.variance(0.0);
  for (std::size_t i = 1; i <= points + 1; ++i) {
    const double lambda = std::min(1.0, static_cast<double>(i) * step);
    const double v = m.variance(lambda);
    if (v < best) {
      best = v;
      best_lambda = lambda;
    }
    if (lambda >= 1.0) break;
  }
  return best_lambda;
}

}  // namespace detail

/// Chooses lambda per `policy`. Analytic returns the clamped variance
/// minimizer cov/(var_g + (n/N) var_u); when that denominator is zero it
/// falls back to a 0.01 grid (which resolves to 0) and records a warning.
inline double select_lambda(std::span<const PerQueryStats> gold, std::span<const PerQueryStats> unlabeled,
                            const LambdaPolicy& policy, std::vector<std::string>* warnings = nullptr) {
  if (policy.mode == LambdaPolicy::Mode::Fixed) return policy.value;
  const PpiMoments m = ppi_moments(gold, unlabeled);
  const double denom = m.var_mu_gold + static_cast<double>(m.n) / static_cast<double>(m.N) * m.var_mu_unlabeled;
  if (policy.mode == LambdaPolicy::Mode::GridSearch) return detail::grid_lambda(m, policy.value);
  if (!(denom > 0.0)) {
    if (warnings) warnings->push_back("annotator expectations have zero variance; lambda set to 0");
    return detail::grid_lambda(m, 0.01);
  }
  return std::clamp(m.cov_gold / denom, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// PPI++
// ---------------------------------------------------------------------------

/// lambda * mean_u(mu) + mean_g(phi - lambda * mu). The raw value may leave
/// [0,1]; `value_clamped` carries the clamped counterpart.
inline Estimate estimate_precise_ppi(std::span<const PerQueryStats> gold, std::span<const PerQueryStats> unlabeled,
                                     const LambdaPolicy& policy = LambdaPolicy::analytic(), double level = 0.95) {
  detail::check_level(level);
  if (gold.empty()) throw PreconditionError("PPI estimate needs a non-empty gold set");
  if (unlabeled.empty()) throw PreconditionError("PPI estimate needs a non-empty unlabeled set");
  std::vector<std::string> warnings;
  const double lambda = select_lambda(gold, unlabeled, policy, &warnings);

  stats::CompensatedSum rect;
  for (const auto& q : gold) {
    if (!q.phi) throw std::invalid_argument("gold stats entry '" + q.query_id + "' has no phi");
    rect.add(*q.phi - lambda * q.mu_tilde);
  }
  stats::CompensatedSum pred;
  for (const auto& q : unlabeled) pred.add(q.mu_tilde);
  const double value = lambda * (pred.value() / static_cast<double>(unlabeled.size())) +
                       rect.value() / static_cast<double>(gold.size());

  std::optional<double> var;
  if (gold.size() >= 2 && unlabeled.size() >= 2) var = ppi_plugin_variance(gold, unlabeled, lambda);
  Estimate e = detail::make_estimate(EstimatorKind::PrecisePpi, value, var, level, gold.size(), unlabeled.size());
  e.lambda = lambda;
  e.warnings = std::move(warnings);
  return e;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Estimate& e) {
  nlohmann::json j;
  j["estimator"] = std::string(to_string(e.estimator));
  j["value"] = e.value;
  j["value_clamped"] = e.value_clamped;
  j["variance"] = e.variance ? nlohmann::json(*e.variance) : nlohmann::json(nullptr);
  j["ci"] = e.ci ? nlohmann::json::array({e.ci->lower, e.ci->upper}) : nlohmann::json(nullptr);
  j["level"] = e.level;
  j["lambda"] = e.lambda ? nlohmann::json(*e.lambda) : nlohmann::json(nullptr);
  j["n"] = e.n;
  j["N"] = e.N;
  j["warnings"] = e.warnings;
  return j;
}

inline Estimate estimate_from_json(const nlohmann::json& j) {
  Estimate e;
  const auto kind = parse_estimator(j.at("estimator").get<std::string>());
  if (!kind) throw InputError("unknown estimator '" + j.at("estimator").get<std::string>() + "'");
  e.estimator = *kind;
  e.value = j.at("value").get<double>();
  e.value_clamped = j.at("value_clamped").get<double>();
  if (!j.at("variance").is_null()) e.variance = j["variance"].get<double>();
  if (!j.at("ci").is_null()) e.ci = Interval{j["ci"].at(0).get<double>(), j["ci"].at(1).get<double>()};
  e.level = j.at("level").get<double>();
  if (!j.at("lambda").is_null()) e.lambda = j["lambda"].get<double>();
  e.n = j.at("n").get<std::size_t>();
  e.N = j.at("N").get<std::size_t>();
  e.warnings = j.value("warnings", std::vector<std::string>{});
  return e;
}

// ---------------------------------------------------------------------------
// End-to-end estimation over a dataset
// ---------------------------------------------------------------------------

struct EstimationConfig {
  MetricFn metric = precision_at_k_metric();
  ConfidenceScale scale;
  bool calibrate = false;
  double bin_threshold = 0.5;
  double level = 0.95;
  LambdaPolicy lambda_policy = LambdaPolicy::analytic();
  std::vector<EstimatorKind> estimators{std::begin(kAllEstimators), std::end(kAllEstimators)};
};

struct EstimationResult {
  std::vector<Estimate> estimates;
  std::optional<CalibrationMap> calibration;
  std::vector<std::string> warnings;
};

/// Optionally fits calibration on the gold docs, applies it to both splits,
/// and runs every requested estimator in the requested order.
inline EstimationResult run_estimators(const Dataset& d, const EstimationConfig& cfg) {
  EstimationResult out;
  const CalibrationMap* cal = nullptr;
  if (cfg.calibrate) {
    const auto pairs = labeled_scores(d.gold, cfg.scale);
    out.calibration = fit_isotonic(pairs, &out.warnings);
    cal = &*out.calibration;
    const bool uses_rectifier =
        std::find(cfg.estimators.begin(), cfg.estimators.end(), EstimatorKind::PrecisePpi) != cfg.estimators.end();
    if (uses_rectifier) out.warnings.push_back("calibration was fitted on the same gold set used by the PPI rectifier");
  }
  const SplitStats s = per_query_stats(d, cfg.metric, cfg.scale, cal);
  for (auto kind : cfg.estimators) {
    switch (kind) {
      case EstimatorKind::GoldOnly: out.estimates.push_back(estimate_gold(s.gold, cfg.level)); break;
      case EstimatorKind::LlmProb: {
        out.estimates.push_back(estimate_llm_prob(s.unlabeled, cfg.level));
        break;
      }
      case EstimatorKind::LlmBin:
        out.estimates.push_back(estimate_llm_bin(d, cfg.bin_threshold, cfg.metric, cfg.level, cfg.scale, cal));
        break;
      case EstimatorKind::PrecisePpi:
        out.estimates.push_back(estimate_precise_ppi(s.gold, s.unlabeled, cfg.lambda_policy, cfg.level));
        break;
    }
  }
  return out;
}

}  // namespace precise
