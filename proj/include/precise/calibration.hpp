#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "precise/dataset.hpp"
#include "precise/errors.hpp"

namespace precise {

/// Numeric score for each verbal confidence level. Scores are strictly
/// increasing, the lowest >= 0.5 and the highest <= 1.0.
class ConfidenceScale {
 public:
  ConfidenceScale() : scores_{0.5, 0.6, 0.7, 0.8, 0.9, 1.0} {}
  explicit ConfidenceScale(std::array<double, kNumConfidenceLevels> scores) : scores_(scores) { validate(); }

  double score(Confidence c) const { return scores_[static_cast<std::size_t>(c)]; }
  const std::array<double, kNumConfidenceLevels>& scores() const { return scores_; }

  /// Parses `{"About Even": 0.5, ...}`; all six phrases are required and
  /// matched case-insensitively.
  static ConfidenceScale from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InputError("confidence scale must be a JSON object");
    std::array<double, kNumConfidenceLevels> scores{};
    std::array<bool, kNumConfidenceLevels> set{};
    for (const auto& [key, value] : j.items()) {
      const auto c = parse_confidence(key);
      if (!c) throw InputError("unknown confidence level '" + key + "' in scale");
      if (!value.is_number()) throw InputError("score for '" + key + "' must be numeric");
      scores[static_cast<std::size_t>(*c)] = value.get<double>();
      set[static_cast<std::size_t>(*c)] = true;
    }
    for (std::size_t i = 0; i < kNumConfidenceLevels; ++i) {
      if (!set[i]) throw InputError("confidence scale lacks '" + std::string(kConfidencePhrases[i]) + "'");
    }
    try {
      return ConfidenceScale(scores);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < kNumConfidenceLevels; ++i) j[std::string(kConfidencePhrases[i])] = scores_[i];
    return j;
  }

  friend bool operator==(const ConfidenceScale&, const ConfidenceScale&) = default;

 private:
  void validate() const {
    if (!(scores_.front() >= 0.5) || !(scores_.back() <= 1.0)) {
      throw std::invalid_argument("confidence scores must lie in [0.5, 1.0]");
    }
    for (std::size_t i = 1; i < scores_.size(); ++i) {
      if (!(scores_[i] > scores_[i - 1])) throw std::invalid_argument("confidence scores must be strictly increasing");
    }
  }

  std::array<double, kNumConfidenceLevels> scores_;
};

/// Relevant verdicts map to the level's score, irrelevant ones to 1 - score.
inline double raw_probability(const VerbalVerdict& v, const ConfidenceScale& scale) {
  const double s = scale.score(v.confidence);
  return v.verdict == Verdict::Relevant ? s : 1.0 - s;
}

inline double raw_probability(std::string_view verdict, std::string_view confidence, const ConfidenceScale& scale) {
  const auto v = parse_verdict(verdict);
  if (!v) throw InputError("unknown verdict '" + std::string(verdict) + "'");
  const auto c = parse_confidence(confidence);
  if (!c) throw InputError("unknown confidence label '" + std::string(confidence) + "'");
  return raw_probability(VerbalVerdict{*v, *c}, scale);
}

inline double raw_probability(const Annotation& a, const ConfidenceScale& scale) {
  if (const double* p = std::get_if<double>(&a)) return *p;
  return raw_probability(std::get<VerbalVerdict>(a), scale);
}

/// Monotone step function from raw to calibrated probability. Each
/// breakpoint (x, v) means "v for raw in [x, next x)"; inputs outside the
/// breakpoint range clamp to the nearest end.
class CalibrationMap {
 public:
  using Breakpoint = std::pair<double, double>;

  CalibrationMap() = default;
  explicit CalibrationMap(std::vector<Breakpoint> breakpoints) : breakpoints_(std::move(breakpoints)) {
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      const auto& [x, v] = breakpoints_[i];
      if (!(x >= 0.0 && x <= 1.0 && v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("calibration breakpoints must lie in [0,1]");
      }
      if (i > 0 && !(x > breakpoints_[i - 1].first)) {
        throw std::invalid_argument("calibration breakpoints must have strictly increasing raw values");
      }
      if (i > 0 && v < breakpoints_[i - 1].second) {
        throw std::invalid_argument("calibrated values must be non-decreasing");
      }
    }
  }

  const std::vector<Breakpoint>& breakpoints() const { return breakpoints_; }
  bool empty() const { return breakpoints_.empty(); }

  double apply(double raw) const {
    if (breakpoints_.empty()) throw std::invalid_argument("apply_calibration: empty map");
    if (!(raw >= 0.0 && raw <= 1.0)) throw std::invalid_argument("apply_calibration: raw probability outside [0,1]");
    // Greatest breakpoint <= raw.
    auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), raw,
                               [](double r, const Breakpoint& b) { return r < b.first; });
    if (it == breakpoints_.begin()) return breakpoints_.front().second;
    return std::prev(it)->second;
  }

  nlohmann::json to_json() const {
    nlohmann::json bp = nlohmann::json::array();
    for (const auto& [x, v] : breakpoints_) bp.push_back({x, v});
    return {{"breakpoints", std::move(bp)}};
  }

  static CalibrationMap from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("breakpoints") || !j["breakpoints"].is_array()) {
      throw InputError("calibration map JSON needs a 'breakpoints' array");
    }
    std::vector<Breakpoint> bps;
    for (const auto& e : j["breakpoints"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw InputError("each breakpoint must be a [raw, calibrated] pair");
      }
      bps.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    try {
      return CalibrationMap(std::move(bps));
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }

  friend bool operator==(const CalibrationMap&, const CalibrationMap&) = default;

 private:
  std::vector<Breakpoint> breakpoints_;
};

inline double apply_calibration(const CalibrationMap& map, double raw) { return map.apply(raw); }

/// A raw annotator probability paired with its gold label.
struct LabeledScore {
  double raw = 0.0;
  bool relevant = false;
};

/// Least-squares monotone non-decreasing fit by pool-adjacent-violators.
/// Pairs with equal raw value are pooled first. Adjacent output steps with
/// equal value are merged, so the map holds one breakpoint per distinct level.
inline CalibrationMap fit_isotonic(std::span<const LabeledScore> pairs, std::vector<std::string>* warnings = nullptr) {
  if (pairs.size() < 2) throw PreconditionError("isotonic calibration needs at least 2 labeled pairs");
  for (const auto& p : pairs) {
    if (!(p.raw >= 0.0 && p.raw <= 1.0)) throw std::invalid_argument("fit_isotonic: raw probability outside [0,1]");
  }
  std::vector<LabeledScore> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const LabeledScore& a, const LabeledScore& b) { return a.raw < b.raw; });

  struct Block {
    double x;       // smallest raw value in the block
    double weight;  // number of pairs
    double total;   // number of relevant labels
    double mean() const { return total / weight; }
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < sorted.size();) {
    Block b{sorted[i].raw, 0.0, 0.0};
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].raw == sorted[i].raw; ++j) {
      b.weight += 1.0;
      b.total += sorted[j].relevant ? 1.0 : 0.0;
    }
    i = j;
    blocks.push_back(b);
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block last = blocks.back();
      blocks.pop_back();
      blocks.back().weight += last.weight;
      blocks.back().total += last.total;
    }
  }

  std::vector<CalibrationMap::Breakpoint> bps;
  for (const auto& b : blocks) {
    const double v = std::clamp(b.mean(), 0.0, 1.0);
    if (!bps.empty() && bps.back().second == v) continue;
    bps.emplace_back(b.x, v);
  }
  if (bps.size() == 1 && warnings) {
    const bool one_label = std::all_of(sorted.begin(), sorted.end(),
                                       [&](const LabeledScore& p) { return p.relevant == sorted.front().relevant; });
    warnings->push_back(one_label ? "all calibration pairs share one label; calibration map is constant"
                                  : "isotonic fit collapsed to a constant map");
  }
  return CalibrationMap(std::move(bps));
}

/// Per-document probabilities of a query, mapped through `cal` when given.
inline std::vector<double> query_probabilities(const QueryInstance& q, const ConfidenceScale& scale,
                                               const CalibrationMap* cal = nullptr) {
  std::vector<double> p;
  p.reserve(q.docs.size());
  for (const auto& d : q.docs) {
    const double raw = raw_probability(d.annotation, scale);
    p.push_back(cal ? cal->apply(raw) : raw);
  }
  return p;
}

/// (raw probability, gold label) for every labeled doc of the given queries.
inline std::vector<LabeledScore> labeled_scores(std::span<const QueryInstance> queries, const ConfidenceScale& scale) {
  std::vector<LabeledScore> out;
  for (const auto& q : queries) {
    for (const auto& d : q.docs) {
      if (d.gold_relevant) out.push_back({raw_probability(d.annotation, scale), *d.gold_relevant});
    }
  }
  return out;
}

}  // namespace precise
