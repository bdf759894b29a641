#pragma once

// End-to-end experiment assembly: seeded population and data, coalition
// formation, simulation, and parameter sweeps over config fields.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fedcure/coalition.hpp"
#include "fedcure/config.hpp"
#include "fedcure/engine.hpp"
#include "fedcure/learner.hpp"
#include "fedcure/metrics.hpp"

namespace fedcure {

struct ExperimentSetup {
  std::vector<ClientProfile> clients;
  SyntheticDataset data;
  std::vector<std::vector<std::size_t>> shards;
  LatencyModel latency;
  Partition initial;
};

/// Population for a config: disjoint-label initial coalitions, client
/// hardware drawn per client, a lognormal edge-cloud delay per edge.
inline ExperimentSetup build_setup(const ExperimentConfig& config) {
  config.validate();
  const RandomSource root(config.seed);
  const auto n = static_cast<std::size_t>(config.n_clients);
  const auto m_count = static_cast<std::size_t>(config.n_edges);

  ExperimentSetup s;
  RandomSource data_rng = root.child("data");
  s.data = generate(static_cast<std::size_t>(config.n_classes), static_cast<std::size_t>(config.dim),
                    static_cast<std::size_t>(config.train_per_class), static_cast<std::size_t>(config.test_per_class),
                    config.class_sep, data_rng);
  s.initial = Partition::blocks(n, m_count);
  RandomSource shard_rng = root.child("shard");
  s.shards = shard_non_iid(s.data, s.initial, static_cast<std::size_t>(config.labels_per_coalition), shard_rng);

  s.clients.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomSource rng = root.child("client", i);
    ClientProfile& c = s.clients[i];
    c.id = i;
    c.label_counts = label_counts_of(s.data.train, s.shards[i], s.data.n_classes);
    c.dataset_size = s.shards[i].size();
    c.comp_load = rng.uniform(config.comp_load_min, config.comp_load_max);
    c.f_max = rng.uniform(config.f_max_min, config.f_max_max);
    c.comm_delay = rng.uniform(0.0, config.comm_delay_max);
    c.validate();
    if (c.dataset_size == 0) throw Error(ErrorCode::InfeasibleShard, "client " + std::to_string(i) + " received no data");
  }

  s.latency.noise_sigma = config.noise_sigma;
  s.latency.tau_c = config.tau_c;
  s.latency.tau_e = config.tau_e;
  for (const auto& c : s.clients) {
    s.latency.comp_load.push_back(c.comp_load);
    s.latency.f_max.push_back(c.f_max);
    s.latency.comm_delay.push_back(c.comm_delay);
  }
  for (std::size_t m = 0; m < m_count; ++m) {
    RandomSource rng = root.child("edge", m);
    s.latency.edge_cloud_delay.push_back(config.edge_delay_median * std::exp(config.edge_delay_spread * rng.normal()));
  }
  return s;
}

inline FormationResult form_coalitions(const ExperimentConfig& config, const ExperimentSetup& setup) {
  RandomSource rng = RandomSource(config.seed).child("formation");
  return run_formation(setup.initial, setup.clients, static_cast<std::size_t>(config.max_game_iters), rng);
}

struct ExperimentResult {
  ExperimentSetup setup;
  Partition partition;  // the partition that was simulated
  RunMetrics metrics;
};

inline ExperimentResult run_experiment(const ExperimentConfig& config, bool skip_formation = false) {
  ExperimentResult r;
  r.setup = build_setup(config);
  GameTrace trace;
  trace.initial_avg_js = partition_avg_js(r.setup.initial, r.setup.clients);
  r.partition = r.setup.initial;
  if (!skip_formation) {
    FormationResult f = form_coalitions(config, r.setup);
    r.partition = std::move(f.partition);
    trace = std::move(f.trace);
  } else {
    trace.converged = false;
  }
  SimulationEnv env{r.setup.clients, &r.setup.latency, &r.setup.data, &r.setup.shards};
  r.metrics = run_simulation(config, env, r.partition);
  r.metrics.formation = std::move(trace);
  r.metrics.summary.initial_avg_js = r.metrics.formation.initial_avg_js;
  return r;
}

struct SweepPoint {
  double value = 0.0;
  RunMetrics metrics;
};

/// Integral values print without a decimal point so integer fields accept them.
inline std::string format_sweep_value(double v) {
  char buf[40];
  if (std::floor(v) == v && std::abs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  else
    std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Independent seeded runs, one per value of a numeric config field.
inline std::vector<SweepPoint> sweep(const ExperimentConfig& base, const std::string& parameter,
                                     const std::vector<double>& values, bool skip_formation = false) {
  const ConfigField* field = find_field(parameter);
  if (!field || !field->numeric)
    throw Error(ErrorCode::ConfigError, "'" + parameter + "' is not a numeric config field");
  std::vector<SweepPoint> out;
  for (double v : values) {
    ExperimentConfig c = base;
    field->from_text(c, format_sweep_value(v));
    c.validate();
    out.push_back({v, run_experiment(c, skip_formation).metrics});
  }
  return out;
}

}  // namespace fedcure
