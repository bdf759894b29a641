#pragma once

// CPU frequency allocation for the clients of a scheduled coalition.
//
// Each client maximises Z(f) = alpha * (1 - c / (f * T_hat)) - gamma * f^varsigma
// over f in (0, f_max]. Z is strictly concave in f, so the stationary point
// (alpha * c / (varsigma * gamma * T_hat))^(1 / (varsigma + 1)) clamped to
// f_max is the global maximiser.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fedcure/core.hpp"

namespace fedcure {

struct UtilityParams {
  double alpha = 1.0;
  double gamma = 1.0;
  double varsigma = 2.0;

  void validate() const {
    if (!(alpha > 0.0) || !(gamma > 0.0) || !(varsigma >= 1.0))
      throw Error(ErrorCode::InvalidArgument, "utility needs alpha > 0, gamma > 0, varsigma >= 1");
  }
};

inline double utility(const UtilityParams& params, double comp_load, double t_hat, double freq) {
  if (!(freq > 0.0)) throw Error(ErrorCode::InvalidFrequency, "frequency must be positive");
  if (!(t_hat > 0.0) || !(comp_load > 0.0))
    throw Error(ErrorCode::InvalidArgument, "comp_load and T_hat must be positive");
  return params.alpha * (1.0 - comp_load / (freq * t_hat)) - params.gamma * std::pow(freq, params.varsigma);
}

/// Unclamped stationary point of the utility.
inline double interior_frequency(const UtilityParams& params, double comp_load, double t_hat) {
  return std::pow(params.alpha * comp_load / (params.varsigma * params.gamma * t_hat), 1.0 / (params.varsigma + 1.0));
}

inline double optimal_frequency(const UtilityParams& params, double comp_load, double t_hat, double f_max) {
  if (!(comp_load > 0.0) || !(t_hat > 0.0) || !(f_max > 0.0))
    throw Error(ErrorCode::InvalidArgument, "optimal_frequency inputs must be positive");
  return std::min(f_max, interior_frequency(params, comp_load, t_hat));
}

struct FrequencyAllocation {
  std::size_t client = 0;
  double freq = 0.0;
  bool clamped = false;
};

/// One optimal frequency per member, all driven by the coalition's latency estimate.
inline std::vector<FrequencyAllocation> apply_allocation(std::span<const std::size_t> members,
                                                         std::span<const ClientProfile> clients,
                                                         const UtilityParams& params, double t_hat) {
  std::vector<FrequencyAllocation> out;
  out.reserve(members.size());
  for (std::size_t n : members) {
    const ClientProfile& c = clients[n];
    double interior = interior_frequency(params, c.comp_load, t_hat);
    double f = optimal_frequency(params, c.comp_load, t_hat, c.f_max);
    out.push_back({n, f, interior > c.f_max});
  }
  return out;
}

}  // namespace fedcure
