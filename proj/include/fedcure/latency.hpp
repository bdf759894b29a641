#pragma once

// Coalition training latency: a ground-truth generator for the simulator and
// a conjugate Normal-Normal belief that yields the scheduler's estimate.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fedcure/core.hpp"

namespace fedcure {

struct LatencyModel {
  // per client
  std::vector<double> comp_load;   // cycles per local step
  std::vector<double> f_max;       // cycles per second
  std::vector<double> comm_delay;  // seconds
  // per coalition
  std::vector<double> edge_cloud_delay;  // seconds
  double noise_sigma = 0.0;              // log-space std of multiplicative noise
  int tau_c = 1;
  int tau_e = 1;

  void validate() const {
    if (comp_load.size() != f_max.size() || comp_load.size() != comm_delay.size())
      throw Error(ErrorCode::ShapeError, "per-client latency vectors differ in length");
    for (double d : comm_delay)
      if (!(d >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative communication delay");
    for (double d : edge_cloud_delay)
      if (!(d >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative edge-cloud delay");
    if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative noise_sigma");
    if (tau_c < 1 || tau_e < 1) throw Error(ErrorCode::InvalidArgument, "tau_c and tau_e must be >= 1");
  }
};

/// Deterministic part of a coalition's latency: tau_e * max_n(tau_c * c_n / f_n + comm_n).
inline double nominal_latency(const LatencyModel& model, std::span<const std::size_t> members,
                              std::span<const double> freqs) {
  if (members.empty()) throw Error(ErrorCode::EmptyCoalition, "latency of an empty coalition");
  if (freqs.size() != members.size()) throw Error(ErrorCode::ShapeError, "one frequency per member required");
  double slowest = 0.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    std::size_t n = members[i];
    double f = freqs[i];
    if (!(f > 0.0) || f > model.f_max.at(n) * (1.0 + 1e-12))
      throw Error(ErrorCode::InvalidFrequency, "frequency outside (0, f_max] for client " + std::to_string(n));
    slowest = std::max(slowest, model.tau_c * model.comp_load[n] / f + model.comm_delay[n]);
  }
  return model.tau_e * slowest;
}

/// One noisy draw: nominal * lognormal(0, noise_sigma) + edge-cloud delay.
/// A normal variate is always consumed so streams stay aligned across sigmas.
inline double realize_latency(const LatencyModel& model, std::size_t coalition,
                              std::span<const std::size_t> members, std::span<const double> freqs,
                              RandomSource& rng) {
  double base = nominal_latency(model, members, freqs);
  double z = rng.normal();
  double noise = model.noise_sigma > 0.0 ? std::exp(model.noise_sigma * z) : 1.0;
  return base * noise + model.edge_cloud_delay.at(coalition);
}

/// Normal prior on the mean latency, Normal likelihood with known variance.
struct LatencyBelief {
  double prior_mean = 1.0;
  double prior_var = 1.0;
  double obs_var = 1.0;
  std::size_t n_obs = 0;
  double obs_sum = 0.0;

  double precision() const { return 1.0 / prior_var + static_cast<double>(n_obs) / obs_var; }
  double posterior_var() const { return 1.0 / precision(); }
  double posterior_mean() const { return (prior_mean / prior_var + obs_sum / obs_var) / precision(); }

  /// Weight on the prior mean; the posterior mean is w*mu0 + (1-w)*sample_mean.
  double prior_weight() const { return (1.0 / prior_var) / precision(); }
};

inline LatencyBelief make_belief(double prior_mean, double prior_var, double obs_var) {
  if (!(prior_var > 0.0) || !(obs_var > 0.0))
    throw Error(ErrorCode::InvalidArgument, "belief variances must be positive");
  return {prior_mean, prior_var, obs_var, 0, 0.0};
}

/// Relative floor on the observation variance when noise_sigma is zero.
inline constexpr double kMinRelativeObsVar = 1e-6;

/// Prior centred on a coalition's first observed latency with sigma0^2 = mu0^2
/// and sigma_obs^2 = (noise_sigma * mu0)^2.
inline LatencyBelief belief_from_first_observation(double first, double noise_sigma) {
  if (!(first > 0.0)) throw Error(ErrorCode::InvalidObservation, "latency observation must be positive");
  double scale = first * first;
  double obs_var = std::max(noise_sigma * noise_sigma, kMinRelativeObsVar) * scale;
  return make_belief(first, scale, obs_var);
}

inline LatencyBelief update_belief(LatencyBelief belief, double observation) {
  if (!(observation > 0.0) || !std::isfinite(observation))
    throw Error(ErrorCode::InvalidObservation, "latency observation must be positive");
  belief.n_obs += 1;
  belief.obs_sum += observation;
  return belief;
}

inline double estimate(const LatencyBelief& belief) { return belief.posterior_mean(); }

}  // namespace fedcure
