#pragma once

// Discrete-event loop for semi-asynchronous hierarchical training.
//
// Round 0 dispatches every coalition with the initial global model. Round 1
// starts at the first upload; every later round starts when the coalition
// dispatched in the previous round uploads, so after warmup one coalition is
// in flight and the rest sit in the waiting buffer. Each round the scheduler
// picks one waiting coalition, its buffered edge model is merged with a
// staleness-discounted weight, and the coalition restarts training from the
// fresh global model at the frequencies chosen for it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "fedcure/coalition.hpp"
#include "fedcure/config.hpp"
#include "fedcure/core.hpp"
#include "fedcure/latency.hpp"
#include "fedcure/learner.hpp"
#include "fedcure/metrics.hpp"
#include "fedcure/resource.hpp"
#include "fedcure/scheduler.hpp"

namespace fedcure {

struct GlobalModel {
  std::vector<double> weights;
  long version = 0;
};

/// xi = ell * kpen^phi.
inline double staleness_weight(double ell, double kpen, long phi) {
  if (!(ell > 0.0 && ell < 1.0) || !(kpen > 0.0 && kpen < 1.0) || phi < 0)
    throw Error(ErrorCode::InvalidArgument, "staleness weight needs ell, kpen in (0,1) and phi >= 0");
  return ell * std::pow(kpen, static_cast<double>(phi));
}

/// (1 - xi) * global + xi * edge_model with xi from the staleness.
inline GlobalModel global_aggregate(const GlobalModel& global, std::span<const double> edge_model, long phi,
                                    double ell, double kpen) {
  if (edge_model.size() != global.weights.size())
    throw Error(ErrorCode::ShapeError, "edge model and global model differ in dimension");
  const double xi = staleness_weight(ell, kpen, phi);
  GlobalModel out{global.weights, global.version + 1};
  for (std::size_t i = 0; i < out.weights.size(); ++i)
    out.weights[i] = (1.0 - xi) * global.weights[i] + xi * edge_model[i];
  return out;
}

/// Sample-size weighted mean of client models.
inline std::vector<double> edge_aggregate(std::span<const std::vector<double>> local_models,
                                          std::span<const double> sizes) {
  if (local_models.empty()) throw Error(ErrorCode::EmptyCoalition, "no local models to aggregate");
  if (sizes.size() != local_models.size()) throw Error(ErrorCode::ShapeError, "one size per local model required");
  const std::size_t dim = local_models.front().size();
  std::vector<double> out(dim, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < local_models.size(); ++i) {
    if (!(sizes[i] > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample sizes must be positive");
    if (local_models[i].size() != dim) throw Error(ErrorCode::ShapeError, "local models differ in dimension");
    for (std::size_t p = 0; p < dim; ++p) out[p] += sizes[i] * local_models[i][p];
    total += sizes[i];
  }
  for (double& v : out) v /= total;
  return out;
}

enum class CoalitionStatus { InFlight, Waiting, Idle };

struct CoalitionRuntime {
  CoalitionStatus status = CoalitionStatus::Idle;
  long dispatched_at = 0;
  double arrival_time = 0.0;
  std::optional<std::vector<double>> pending_model;
};

struct SimClock {
  double now = 0.0;
  long round = 0;
};

/// Everything a run needs besides the config and the partition. The learner
/// fields may be left null to simulate scheduling only.
struct SimulationEnv {
  std::span<const ClientProfile> clients;
  const LatencyModel* latency = nullptr;
  const SyntheticDataset* data = nullptr;
  const std::vector<std::vector<std::size_t>>* shards = nullptr;
};

struct NoRoundObserver {
  void operator()(const SimClock&, const std::vector<CoalitionRuntime>&) const noexcept {}
};

namespace detail {

class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const SimulationEnv& env, const RandomSource& root)
      : config_(config), env_(env) {
    if (enabled()) {
      rngs_.reserve(env.clients.size());
      for (std::size_t n = 0; n < env.clients.size(); ++n) rngs_.push_back(root.child("train", n));
    }
  }

  bool enabled() const { return config_.learner && env_.data != nullptr && env_.shards != nullptr; }

  GlobalModel initial_model() const {
    if (!enabled()) return {};
    return {ModelParams::zeros(env_.data->n_classes, env_.data->dim).w, 0};
  }

  /// tau_e edge rounds of tau_c local steps per member, starting from `start`.
  std::vector<double> train_coalition(const std::vector<double>& start, std::span<const std::size_t> members) {
    if (!enabled()) return {};
    ModelParams edge{env_.data->n_classes, env_.data->dim, start};
    std::vector<std::vector<double>> locals;
    std::vector<double> sizes;
    for (int e = 0; e < config_.tau_e; ++e) {
      locals.clear();
      sizes.clear();
      for (std::size_t n : members) {
        const auto& shard = (*env_.shards)[n];
        if (shard.empty()) continue;
        ModelParams local = local_train(edge, env_.data->train, shard, config_.tau_c, config_.lr,
                                        static_cast<std::size_t>(config_.batch_size), rngs_[n]);
        locals.push_back(std::move(local.w));
        sizes.push_back(static_cast<double>(shard.size()));
      }
      if (locals.empty()) break;
      edge.w = edge_aggregate(locals, sizes);
    }
    return edge.w;
  }

  EvalResult evaluate_model(const GlobalModel& g) const {
    ModelParams p{env_.data->n_classes, env_.data->dim, g.weights};
    return evaluate(p, env_.data->test);
  }

 private:
  const ExperimentConfig& config_;
  const SimulationEnv& env_;
  std::vector<RandomSource> rngs_;
};

inline std::string mask_string(const std::vector<bool>& mask) {
  std::string s(mask.size(), '0');
  for (std::size_t m = 0; m < mask.size(); ++m)
    if (mask[m]) s[m] = '1';
  return s;
}

}  // namespace detail

/// Runs tau_g global rounds after the round-0 dispatch. `observe` is called
/// after every round with the clock and the per-coalition runtime state.
template <typename Observer = NoRoundObserver>
RunMetrics run_simulation(const ExperimentConfig& config, const SimulationEnv& env, const Partition& partition,
                          Observer&& observe = {}) {
  config.validate();
  if (!env.latency) throw Error(ErrorCode::InvalidArgument, "simulation needs a latency model");
  env.latency->validate();
  partition.validate(true);
  if (env.clients.size() != partition.n_clients())
    throw Error(ErrorCode::ShapeError, "client list does not match partition");

  const std::size_t m_count = partition.n_coalitions();
  const RandomSource root = RandomSource(config.seed).child("simulation");
  const UtilityParams utility_params{config.alpha, config.gamma, config.varsigma};
  utility_params.validate();

  std::vector<std::vector<std::size_t>> members(m_count);
  for (std::size_t m = 0; m < m_count; ++m) members[m] = partition.members(m);

  std::vector<RandomSource> latency_rng;
  for (std::size_t m = 0; m < m_count; ++m) latency_rng.push_back(root.child("latency", m));

  detail::Trainer trainer(config, env, root);
  GlobalModel global = trainer.initial_model();

  RunMetrics metrics;
  metrics.n_coalitions = m_count;
  metrics.summary.scheduler = std::string(to_string(config.scheduler_kind));
  metrics.summary.rounds = config.tau_g;

  VirtualQueueState queues = make_queue_state(compute_delta(partition, env.clients, config.kappa));
  std::vector<LatencyBelief> beliefs(m_count);
  std::vector<CoalitionRuntime> runtime(m_count);
  SimClock clock;
  std::optional<std::size_t> last_dispatched;

  // Warmup window for the latency normaliser: the max latency of rounds 0..M-1.
  std::vector<double> warmup;
  auto interval = [&] {
    double s = 0.0;
    for (double v : warmup) s += v;
    return s / static_cast<double>(warmup.size());
  };

  auto f_max_of = [&](std::span<const std::size_t> ms) {
    std::vector<double> f(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) f[i] = env.clients[ms[i]].f_max;
    return f;
  };
  auto estimates = [&] {
    std::vector<double> t(m_count);
    for (std::size_t m = 0; m < m_count; ++m) t[m] = estimate(beliefs[m]);
    return t;
  };
  auto evaluate_row = [&](RoundRow& row) {
    if (!trainer.enabled()) return;
    if (row.t % config.eval_every != 0 && row.t != config.tau_g) return;
    EvalResult e = trainer.evaluate_model(global);
    row.loss = e.loss;
    row.accuracy = e.accuracy;
  };

  // Round 0: every coalition starts from the initial model at full speed.
  {
    double max_latency = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      auto freqs = f_max_of(members[m]);
      double latency = realize_latency(*env.latency, m, members[m], freqs, latency_rng[m]);
      beliefs[m] = belief_from_first_observation(latency, env.latency->noise_sigma);
      runtime[m] = {CoalitionStatus::InFlight, 0, latency, trainer.train_coalition(global.weights, members[m])};
      max_latency = std::max(max_latency, latency);
    }
    warmup.push_back(max_latency);
    queues = update_queue(queues, std::nullopt);

    RoundRow row;
    row.t = 0;
    row.clock = 0.0;
    row.chosen = -1;
    row.latency = max_latency;
    row.lambda = queues.lambda;
    row.t_hat = estimates();
    row.available = std::string(m_count, '1');
    evaluate_row(row);
    metrics.rounds.push_back(std::move(row));
    observe(static_cast<const SimClock&>(clock), static_cast<const std::vector<CoalitionRuntime>&>(runtime));
  }

  for (long t = 1; t <= config.tau_g; ++t) {
    clock.round = t;

    // Wait for last round's dispatch; before any, for the earliest upload (ties by index).
    std::optional<std::size_t> next = last_dispatched;
    if (!next)
      for (std::size_t m = 0; m < m_count; ++m) {
        if (runtime[m].status != CoalitionStatus::InFlight) continue;
        if (!next || runtime[m].arrival_time < runtime[*next].arrival_time) next = m;
      }
    if (next) clock.now = std::max(clock.now, runtime[*next].arrival_time);
    std::vector<bool> available(m_count, false);
    for (std::size_t m = 0; m < m_count; ++m) {
      if (runtime[m].status == CoalitionStatus::InFlight && runtime[m].arrival_time <= clock.now)
        runtime[m].status = CoalitionStatus::Waiting;
      available[m] = runtime[m].status == CoalitionStatus::Waiting;
    }

    const double norm = interval();
    std::vector<double> t_hat = estimates();
    ScheduleDecision decision = select(config.scheduler_kind, queues, t_hat, available, config.beta, norm);
    const std::size_t chosen = decision.chosen;
    CoalitionRuntime& rt = runtime[chosen];

    const long phi = t - rt.dispatched_at;
    const double xi = staleness_weight(config.ell, config.kpen, phi);
    if (trainer.enabled()) global = global_aggregate(global, *rt.pending_model, phi, config.ell, config.kpen);
    rt.pending_model.reset();
    rt.status = CoalitionStatus::Idle;

    std::vector<double> freqs;
    if (config.allocate_frequency) {
      for (const auto& a : apply_allocation(members[chosen], env.clients, utility_params, t_hat[chosen])) {
        freqs.push_back(a.freq);
        metrics.allocations.push_back({t, chosen, a.client, a.freq, a.clamped});
      }
    } else {
      freqs = f_max_of(members[chosen]);
      for (std::size_t i = 0; i < freqs.size(); ++i)
        metrics.allocations.push_back({t, chosen, members[chosen][i], freqs[i], true});
    }

    const double latency = realize_latency(*env.latency, chosen, members[chosen], freqs, latency_rng[chosen]);
    rt.pending_model = trainer.train_coalition(global.weights, members[chosen]);
    rt.dispatched_at = t;
    rt.arrival_time = clock.now + latency;
    rt.status = CoalitionStatus::InFlight;
    last_dispatched = chosen;

    beliefs[chosen] = update_belief(beliefs[chosen], latency);
    if (static_cast<std::size_t>(t) < m_count) warmup.push_back(latency);
    queues = update_queue(queues, chosen);

    RoundRow row;
    row.t = t;
    row.clock = clock.now;
    row.chosen = static_cast<long>(chosen);
    row.phi = phi;
    row.xi = xi;
    row.latency = latency;
    row.lambda = queues.lambda;
    row.t_hat = std::move(t_hat);
    row.available = detail::mask_string(available);
    evaluate_row(row);
    metrics.rounds.push_back(std::move(row));
    observe(static_cast<const SimClock&>(clock), static_cast<const std::vector<CoalitionRuntime>&>(runtime));
  }

  RunSummary& s = metrics.summary;
  s.delta = queues.delta;
  s.participation = participation_from_rows(metrics.rounds, m_count);
  s.mean_rate = mean_rate(queues);
  s.max_queue = max_queue_from_rows(metrics.rounds);
  s.interval = interval();
  s.cov = cov(round_latencies(metrics));
  if (m_count >= 2) s.final_avg_js = partition_avg_js(partition, env.clients);
  s.final_loss = metrics.rounds.back().loss;
  s.final_accuracy = metrics.rounds.back().accuracy;
  return metrics;
}

}  // namespace fedcure
