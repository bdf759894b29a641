#pragma once

// Coalition formation game. Clients switch edge servers whenever the move
// strictly lowers the mean pairwise JS divergence between coalition label
// distributions. The pairwise JS sum is an exact potential for this game, so
// improvement dynamics terminate in a partition no single switch can improve.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fedcure/core.hpp"
#include "fedcure/divergence.hpp"

namespace fedcure {

/// A switch is accepted only below -kSwitchTolerance; ties within it count as equal.
inline constexpr double kSwitchTolerance = 1e-12;

struct SwitchProposal {
  std::size_t client = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  double delta_avg_js = 0.0;  // post - pre
  bool feasible = true;       // false when the move would empty `from`
  std::size_t iteration = 0;

  bool improving() const { return feasible && delta_avg_js < -kSwitchTolerance; }
};

struct GameTrace {
  std::size_t iterations = 0;
  double initial_avg_js = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> js_history;  // avg-JS after each accepted switch
  std::vector<SwitchProposal> switches;
  bool converged = false;

  double final_avg_js() const { return js_history.empty() ? initial_avg_js : js_history.back(); }
};

inline double pair_count(std::size_t m) {
  return 0.5 * static_cast<double>(m) * static_cast<double>(m - 1);
}

/// Per-coalition label counts kept in sync with a partition, so a candidate
/// switch can be scored by touching only the two coalitions it changes.
class CoalitionHistograms {
 public:
  CoalitionHistograms(const Partition& partition, std::span<const ClientProfile> clients)
      : counts_(partition.n_coalitions()), totals_(partition.n_coalitions(), 0.0),
        members_(partition.n_coalitions(), 0) {
    if (clients.size() != partition.n_clients())
      throw Error(ErrorCode::ShapeError, "client list does not match partition");
    const std::size_t k = clients.empty() ? 0 : clients.front().label_counts.size();
    for (auto& c : counts_) c.assign(k, 0.0);
    for (std::size_t n = 0; n < clients.size(); ++n) {
      if (clients[n].label_counts.size() != k) throw Error(ErrorCode::ShapeError, "label count lengths differ");
      add(clients[n], partition.coalition_of(n), +1.0);
    }
    probs_.resize(counts_.size());
    for (std::size_t m = 0; m < counts_.size(); ++m) refresh(m);
  }

  std::size_t n_coalitions() const noexcept { return counts_.size(); }
  std::size_t member_count(std::size_t m) const { return members_.at(m); }
  const std::vector<double>& probs(std::size_t m) const { return probs_.at(m); }

  /// Raw sum of JS over all coalition pairs (the game's potential).
  double pairwise_sum() const {
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < probs_.size(); ++i)
      for (std::size_t j = i + 1; j < probs_.size(); ++j) sum += detail::js_raw(probs_[i], probs_[j]);
    return sum;
  }

  /// Change of the mover's utility when `client` moves from -> to. Only pairs
  /// touching `from` or `to` change; pairs among the remaining coalitions cancel.
  double utility_delta(const ClientProfile& client, std::size_t from, std::size_t to) const {
    std::vector<double> from_after = shifted(from, client, -1.0);
    std::vector<double> to_after = shifted(to, client, +1.0);
    double delta = 0.0;
    for (std::size_t j = 0; j < probs_.size(); ++j) {
      if (j == from || j == to) continue;
      delta += detail::js_raw(from_after, probs_[j]) - detail::js_raw(probs_[from], probs_[j]);
      delta += detail::js_raw(to_after, probs_[j]) - detail::js_raw(probs_[to], probs_[j]);
    }
    delta += detail::js_raw(from_after, to_after) - detail::js_raw(probs_[from], probs_[to]);
    return delta;
  }

  void apply(const ClientProfile& client, std::size_t from, std::size_t to) {
    add(client, from, -1.0);
    add(client, to, +1.0);
    refresh(from);
    refresh(to);
  }

 private:
  void add(const ClientProfile& client, std::size_t m, double sign) {
    auto& c = counts_.at(m);
    for (std::size_t k = 0; k < c.size(); ++k) {
      double v = sign * static_cast<double>(client.label_counts[k]);
      c[k] += v;
      totals_[m] += v;
    }
    members_[m] = sign > 0 ? members_[m] + 1 : members_[m] - 1;
  }

  void refresh(std::size_t m) {
    probs_[m].assign(counts_[m].size(), 0.0);
    if (totals_[m] > 0.0)
      for (std::size_t k = 0; k < counts_[m].size(); ++k) probs_[m][k] = counts_[m][k] / totals_[m];
  }

  std::vector<double> shifted(std::size_t m, const ClientProfile& client, double sign) const {
    std::vector<double> p(counts_[m].size(), 0.0);
    double total = totals_[m] + sign * static_cast<double>(client.dataset_size);
    if (total <= 0.0) return p;
    for (std::size_t k = 0; k < p.size(); ++k)
      p[k] = (counts_[m][k] + sign * static_cast<double>(client.label_counts[k])) / total;
    return p;
  }

  std::vector<std::vector<double>> counts_;
  std::vector<double> totals_;
  std::vector<std::size_t> members_;
  std::vector<std::vector<double>> probs_;
};

namespace detail {

inline SwitchProposal score_switch(const CoalitionHistograms& hist, const ClientProfile& client,
                                   std::size_t client_id, std::size_t from, std::size_t to) {
  SwitchProposal p;
  p.client = client_id;
  p.from = from;
  p.to = to;
  if (hist.member_count(from) <= 1) {
    p.feasible = false;
    p.delta_avg_js = std::numeric_limits<double>::infinity();
    return p;
  }
  p.delta_avg_js = hist.utility_delta(client, from, to) / pair_count(hist.n_coalitions());
  return p;
}

inline void check_switch_args(const Partition& partition, std::span<const ClientProfile> clients,
                              std::size_t client, std::size_t to) {
  if (clients.size() != partition.n_clients())
    throw Error(ErrorCode::ShapeError, "client list does not match partition");
  if (client >= partition.n_clients()) throw Error(ErrorCode::InvalidArgument, "client out of range");
  if (to >= partition.n_coalitions()) throw Error(ErrorCode::InvalidCoalition, "target coalition out of range");
  if (partition.coalition_of(client) == to)
    throw Error(ErrorCode::InvalidCoalition, "client already belongs to the target coalition");
}

}  // namespace detail

/// Utility change of `client` for the hypothetical move (pairwise JS sum, not averaged).
inline double switch_utility_delta(const Partition& partition, std::span<const ClientProfile> clients,
                                   std::size_t client, std::size_t to) {
  detail::check_switch_args(partition, clients, client, to);
  CoalitionHistograms hist(partition, clients);
  return hist.utility_delta(clients[client], partition.coalition_of(client), to);
}

inline SwitchProposal evaluate_switch(const Partition& partition, std::span<const ClientProfile> clients,
                                      std::size_t client, std::size_t to) {
  detail::check_switch_args(partition, clients, client, to);
  CoalitionHistograms hist(partition, clients);
  return detail::score_switch(hist, clients[client], client, partition.coalition_of(client), to);
}

/// Sum of JS over all coalition pairs, computed from scratch.
inline double potential(const Partition& partition, std::span<const ClientProfile> clients) {
  if (partition.n_coalitions() < 2)
    throw Error(ErrorCode::InsufficientCoalitions, "potential needs at least two coalitions");
  auto dists = coalition_distributions(partition, clients);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < dists.size(); ++i)
    for (std::size_t j = i + 1; j < dists.size(); ++j) sum += js(dists[i], dists[j]).nats;
  return sum;
}

inline double partition_avg_js(const Partition& partition, std::span<const ClientProfile> clients) {
  return avg_js(coalition_distributions(partition, clients)).nats;
}

inline bool is_stable(const Partition& partition, std::span<const ClientProfile> clients) {
  if (partition.n_coalitions() < 2) return true;
  CoalitionHistograms hist(partition, clients);
  for (std::size_t n = 0; n < partition.n_clients(); ++n) {
    std::size_t from = partition.coalition_of(n);
    for (std::size_t to = 0; to < partition.n_coalitions(); ++to) {
      if (to == from) continue;
      if (detail::score_switch(hist, clients[n], n, from, to).improving()) return false;
    }
  }
  return true;
}

struct FormationResult {
  Partition partition;
  GameTrace trace;
};

struct NoSwitchObserver {
  void operator()(const SwitchProposal&) const noexcept {}
};

/// Improvement dynamics: visit clients in random sweeps; each visit is one
/// iteration, moves the client to its best strictly-improving coalition (ties
/// go to the lowest index), and a sweep without an accepted move certifies
/// convergence. `observe` sees every evaluated candidate switch.
template <typename Observer = NoSwitchObserver>
FormationResult run_formation(const Partition& initial, std::span<const ClientProfile> clients,
                              std::size_t max_iters, RandomSource& rng, Observer&& observe = {}) {
  initial.validate(true);
  FormationResult result{initial, {}};
  GameTrace& trace = result.trace;
  const std::size_t m_count = initial.n_coalitions();
  if (m_count < 2) {
    trace.converged = true;
    return result;
  }

  CoalitionHistograms hist(initial, clients);
  Partition& partition = result.partition;
  trace.initial_avg_js = hist.pairwise_sum() / pair_count(m_count);

  std::vector<std::size_t> order(partition.n_clients());
  std::size_t iter = 0;
  while (iter < max_iters) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    bool accepted_any = false;
    bool full_sweep = true;
    for (std::size_t n : order) {
      if (iter >= max_iters) {
        full_sweep = false;
        break;
      }
      const std::size_t from = partition.coalition_of(n);
      SwitchProposal best;
      best.delta_avg_js = std::numeric_limits<double>::infinity();
      bool have_best = false;
      for (std::size_t to = 0; to < m_count; ++to) {
        if (to == from) continue;
        SwitchProposal p = detail::score_switch(hist, clients[n], n, from, to);
        p.iteration = iter;
        observe(static_cast<const SwitchProposal&>(p));
        if (!p.feasible) continue;
        if (!have_best || p.delta_avg_js < best.delta_avg_js - kSwitchTolerance) {
          best = p;
          have_best = true;
        }
      }
      ++iter;
      if (have_best && best.improving()) {
        hist.apply(clients[n], from, best.to);
        partition.move(n, best.to);
        trace.switches.push_back(best);
        trace.js_history.push_back(hist.pairwise_sum() / pair_count(m_count));
        accepted_any = true;
      }
    }
    if (full_sweep && !accepted_any) {
      trace.converged = true;
      break;
    }
  }
  trace.iterations = iter;
  return result;
}

}  // namespace fedcure
