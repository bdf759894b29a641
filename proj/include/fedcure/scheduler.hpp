#pragma once

// Participation-balanced coalition scheduling. Each coalition carries a
// virtual queue that grows by its participation target every round and
// drains by one when scheduled; the FedCure rule trades queue backlog against
// estimated latency, the baselines use only one of the two.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fedcure/config.hpp"
#include "fedcure/core.hpp"
#include "fedcure/latency.hpp"

namespace fedcure {

struct VirtualQueueState {
  std::vector<double> lambda;
  std::vector<double> delta;
  long t = -1;

  std::size_t size() const noexcept { return lambda.size(); }
};

/// Queues start at -delta for round -1.
inline VirtualQueueState make_queue_state(std::vector<double> delta) {
  VirtualQueueState s;
  s.lambda.resize(delta.size());
  for (std::size_t m = 0; m < delta.size(); ++m) s.lambda[m] = -delta[m];
  s.delta = std::move(delta);
  s.t = -1;
  return s;
}

/// delta_m = kappa * |D_m| / |D|.
inline std::vector<double> compute_delta(const Partition& partition, std::span<const ClientProfile> clients,
                                         double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(ErrorCode::InvalidArgument, "kappa must lie in [0, 1]");
  auto sizes = coalition_sizes(partition, clients);
  double total = 0.0;
  for (double s : sizes) total += s;
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyDataset, "no data across coalitions");
  std::vector<double> delta(sizes.size());
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    if (sizes[m] <= 0.0) throw Error(ErrorCode::EmptyCoalition, "coalition " + std::to_string(m) + " holds no data");
    delta[m] = kappa * sizes[m] / total;
  }
  return delta;
}

/// Advance one round. The first update (round 0) schedules every coalition;
/// afterwards `scheduled` names the single coalition with chi = 1.
inline VirtualQueueState update_queue(VirtualQueueState state, std::optional<std::size_t> scheduled) {
  state.t += 1;
  const bool init_round = state.t == 0;
  if (!init_round && scheduled && *scheduled >= state.size())
    throw Error(ErrorCode::InvalidCoalition, "scheduled coalition out of range");
  for (std::size_t m = 0; m < state.size(); ++m) {
    double chi = (init_round || (scheduled && *scheduled == m)) ? 1.0 : 0.0;
    state.lambda[m] = std::max(state.lambda[m] + state.delta[m] - chi, 0.0);
  }
  return state;
}

inline std::vector<double> mean_rate(const VirtualQueueState& state) {
  if (state.t < 1) throw Error(ErrorCode::Undefined, "mean rate needs t >= 1");
  std::vector<double> out(state.size());
  for (std::size_t m = 0; m < state.size(); ++m) out[m] = state.lambda[m] / static_cast<double>(state.t);
  return out;
}

struct ScheduleDecision {
  std::size_t chosen = 0;
  std::vector<double> scores;  // NaN for unavailable coalitions
  std::vector<bool> available;
};

namespace detail {

template <typename Score>
ScheduleDecision argmax_available(const std::vector<bool>& available, Score&& score) {
  ScheduleDecision d;
  d.available = available;
  d.scores.assign(available.size(), std::numeric_limits<double>::quiet_NaN());
  bool found = false;
  double best = 0.0;
  for (std::size_t m = 0; m < available.size(); ++m) {
    if (!available[m]) continue;
    double s = score(m);
    d.scores[m] = s;
    if (!found || s > best) {
      best = s;
      d.chosen = m;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::NoAvailableCoalition, "no coalition is available");
  return d;
}

inline void check_interval(double interval) {
  if (!(interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "latency normaliser must be positive");
}

}  // namespace detail

/// argmax over available m of lambda_m + beta * (1 - T_hat_m / interval); ties to the lowest index.
inline ScheduleDecision fedcure_select(const VirtualQueueState& state, std::span<const double> t_hat,
                                       const std::vector<bool>& available, double beta, double interval) {
  detail::check_interval(interval);
  if (t_hat.size() != state.size() || available.size() != state.size())
    throw Error(ErrorCode::ShapeError, "scheduler inputs differ in length");
  return detail::argmax_available(available, [&](std::size_t m) {
    return state.lambda[m] + beta * (1.0 - t_hat[m] / interval);
  });
}

inline ScheduleDecision fedcure_select(const VirtualQueueState& state, std::span<const LatencyBelief> beliefs,
                                       const std::vector<bool>& available, double beta, double interval) {
  std::vector<double> t_hat(beliefs.size());
  for (std::size_t m = 0; m < beliefs.size(); ++m) t_hat[m] = estimate(beliefs[m]);
  return fedcure_select(state, std::span<const double>(t_hat), available, beta, interval);
}

/// Minimal estimated latency.
inline ScheduleDecision greedy_select(std::span<const double> t_hat, const std::vector<bool>& available,
                                      double interval) {
  detail::check_interval(interval);
  if (t_hat.size() != available.size()) throw Error(ErrorCode::ShapeError, "scheduler inputs differ in length");
  return detail::argmax_available(available, [&](std::size_t m) { return 1.0 - t_hat[m] / interval; });
}

/// Largest backlog.
inline ScheduleDecision fair_select(const VirtualQueueState& state, const std::vector<bool>& available) {
  if (available.size() != state.size()) throw Error(ErrorCode::ShapeError, "scheduler inputs differ in length");
  return detail::argmax_available(available, [&](std::size_t m) { return state.lambda[m]; });
}

inline ScheduleDecision select(SchedulerKind kind, const VirtualQueueState& state, std::span<const double> t_hat,
                               const std::vector<bool>& available, double beta, double interval) {
  switch (kind) {
    case SchedulerKind::FedCure: return fedcure_select(state, t_hat, available, beta, interval);
    case SchedulerKind::Greedy: return greedy_select(t_hat, available, interval);
    case SchedulerKind::Fair: return fair_select(state, available);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown scheduler kind");
}

}  // namespace fedcure
