#pragma once

// Kullback-Leibler and Jensen-Shannon divergences over label histograms,
// in natural-log units, plus the mean pairwise JS objective.

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "fedcure/core.hpp"

namespace fedcure {

struct DivergenceValue {
  double nats = 0.0;
  friend auto operator<=>(const DivergenceValue&, const DivergenceValue&) = default;
};

inline constexpr double kLn2 = std::numbers::ln2;

/// Probabilities below this are exact zeros for the 0*ln(0/x) = 0 rule.
inline constexpr double kZeroProbability = 1e-15;

namespace detail {

inline double kl_raw(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double pk = p[k] < kZeroProbability ? 0.0 : p[k];
    if (pk == 0.0) continue;
    double qk = q[k] < kZeroProbability ? 0.0 : q[k];
    if (qk == 0.0) return std::numeric_limits<double>::infinity();
    sum += pk * std::log(pk / qk);
  }
  return sum < 0.0 ? 0.0 : sum;
}

/// JS of two histograms already normalized to probabilities.
inline double js_raw(std::span<const double> p, std::span<const double> q) {
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double pk = p[k] < kZeroProbability ? 0.0 : p[k];
    double qk = q[k] < kZeroProbability ? 0.0 : q[k];
    double mk = 0.5 * (pk + qk);
    if (pk > 0.0) sum += pk * std::log(pk / mk);
    if (qk > 0.0) sum += qk * std::log(qk / mk);
  }
  sum *= 0.5;
  return sum < 0.0 ? 0.0 : sum;
}

inline void require_same_length(const LabelDistribution& p, const LabelDistribution& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::ShapeError, "distributions differ in length");
}

}  // namespace detail

inline DivergenceValue kl(const LabelDistribution& p, const LabelDistribution& q) {
  detail::require_same_length(p, q);
  double v = detail::kl_raw(p.probs(), q.probs());
  if (std::isinf(v))
    throw Error(ErrorCode::UnboundedDivergence, "p has mass where q has none");
  return {v};
}

inline DivergenceValue js(const LabelDistribution& p, const LabelDistribution& q) {
  detail::require_same_length(p, q);
  return {detail::js_raw(p.probs(), q.probs())};
}

inline DivergenceValue avg_js(std::span<const LabelDistribution> dists) {
  const std::size_t m = dists.size();
  if (m < 2) throw Error(ErrorCode::InsufficientCoalitions, "mean pairwise JS needs at least two distributions");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) sum += js(dists[i], dists[j]).nats;
  return {sum / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1))};
}

inline DivergenceValue avg_js(const std::vector<LabelDistribution>& dists) {
  return avg_js(std::span<const LabelDistribution>(dists));
}

}  // namespace fedcure
