#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "precise/errors.hpp"
#include "precise/stats.hpp"

namespace precise {

/// Largest K for which the 2^K outcome space is enumerated.
inline constexpr std::size_t kMaxEnumerationK = 20;

/// Relevance of the K retrieved documents, one entry per rank.
class BinaryVector {
 public:
  BinaryVector() = default;
  explicit BinaryVector(std::size_t k) : bits_(k, 0) {}
  BinaryVector(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) {
      if (b != 0 && b != 1) throw std::invalid_argument("BinaryVector entries must be 0 or 1");
      bits_.push_back(static_cast<std::uint8_t>(b));
    }
  }
  explicit BinaryVector(std::vector<bool> const& bits) {
    bits_.reserve(bits.size());
    for (bool b : bits) bits_.push_back(b ? 1 : 0);
  }

  /// The vector whose k-th bit is bit k of `mask`.
  static BinaryVector from_mask(std::uint64_t mask, std::size_t k) {
    BinaryVector v(k);
    v.assign_mask(mask);
    return v;
  }

  void assign_mask(std::uint64_t mask) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] = (mask >> i) & 1u;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }

  friend bool operator==(const BinaryVector&, const BinaryVector&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// A per-query metric over the relevance of the top-K documents.
/// `linear` marks metrics equal to (1/K) * sum of bits, which admit the
/// closed-form expectation.
struct MetricFn {
  std::string name;
  std::function<double(const BinaryVector&)> eval;
  bool linear = false;
};

inline double precision_at_k(const BinaryVector& y) {
  if (y.size() == 0) throw std::invalid_argument("precision_at_k: empty vector");
  return static_cast<double>(y.count()) / static_cast<double>(y.size());
}

inline MetricFn precision_at_k_metric() { return {"precision_at_k", &precision_at_k, true}; }

/// 1 iff every retrieved document is relevant.
inline MetricFn all_relevant_metric() {
  return {"all_relevant", [](const BinaryVector& y) { return y.count() == y.size() ? 1.0 : 0.0; }, false};
}

/// 1 iff at least one retrieved document is relevant.
inline MetricFn success_at_k_metric() {
  return {"success_at_k", [](const BinaryVector& y) { return y.count() > 0 ? 1.0 : 0.0; }, false};
}

namespace detail {
inline void check_probabilities(std::span<const double> p) {
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("probabilities must lie in [0,1]");
  }
}
}  // namespace detail

/// Mass of `y` under independent per-document relevance probabilities `p`.
inline double vector_probability(std::span<const double> p, const BinaryVector& y) {
  if (p.size() != y.size()) throw std::invalid_argument("vector_probability: length mismatch");
  detail::check_probabilities(p);
  double prob = 1.0;
  for (std::size_t k = 0; k < p.size(); ++k) prob *= y[k] ? p[k] : (1.0 - p[k]);
  return prob;
}

/// Expectation of `metric` under the product-Bernoulli distribution by
/// summing over all 2^K relevance vectors.
inline double expected_metric_enumerate(const MetricFn& metric, std::span<const double> p) {
  const std::size_t k = p.size();
  if (k == 0) throw std::invalid_argument("expected_metric_enumerate: empty probability vector");
  if (k > kMaxEnumerationK) {
    throw PreconditionError("enumeration over 2^" + std::to_string(k) + " outcomes exceeds K_max=" +
                            std::to_string(kMaxEnumerationK) + "; use a closed form");
  }
  detail::check_probabilities(p);
  stats::CompensatedSum acc;
  BinaryVector y(k);
  const std::uint64_t outcomes = std::uint64_t{1} << k;
  for (std::uint64_t mask = 0; mask < outcomes; ++mask) {
    y.assign_mask(mask);
    double prob = 1.0;
    for (std::size_t i = 0; i < k; ++i) prob *= y[i] ? p[i] : (1.0 - p[i]);
    if (prob == 0.0) continue;
    acc.add(metric.eval(y) * prob);
  }
  return acc.value();
}

/// Closed-form expectation of a linear metric: the mean of `p`.
inline double expected_metric_linear(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("expected_metric_linear: empty probability vector");
  detail::check_probabilities(p);
  return stats::mean(p);
}

/// Linear fast path when the metric allows it, enumeration otherwise.
inline double expected_metric(const MetricFn& metric, std::span<const double> p) {
  return metric.linear ? expected_metric_linear(p) : expected_metric_enumerate(metric, p);
}

}  // namespace precise
