// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "fedcure/fedcure.hpp"

using namespace fedcure;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Reference JS from raw label counts, kept apart from the library code.
double js_counts(const std::vector<double>& a, const std::vector<double>& b) {
  double sa = std::accumulate(a.begin(), a.end(), 0.0), sb = std::accumulate(b.begin(), b.end(), 0.0);
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double p = a[k] / sa, q = b[k] / sb, m = 0.5 * (p + q);
    if (p > 0) s += 0.5 * p * std::log(p / m);
    if (q > 0) s += 0.5 * q * std::log(q / m);
  }
  return s;
}

std::vector<std::vector<double>> coalition_counts_oracle(const std::vector<std::size_t>& assign, std::size_t m,
                                                         std::span<const ClientProfile> cs) {
  std::vector<std::vector<double>> h(m, std::vector<double>(cs[0].label_counts.size(), 0.0));
  for (std::size_t n = 0; n < cs.size(); ++n)
    for (std::size_t k = 0; k < h[0].size(); ++k) h[assign[n]][k] += static_cast<double>(cs[n].label_counts[k]);
  return h;
}

double potential_oracle(const std::vector<std::size_t>& assign, std::size_t m, std::span<const ClientProfile> cs) {
  auto h = coalition_counts_oracle(assign, m, cs);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) s += js_counts(h[i], h[j]);
  return s;
}

std::vector<ClientProfile> random_population(RandomSource& rng, std::size_t n, std::size_t k) {
  std::vector<ClientProfile> cs(n);
  for (std::size_t i = 0; i < n; ++i) {
    cs[i].id = i;
    cs[i].label_counts.assign(k, 0);
    for (auto& v : cs[i].label_counts) v = rng.uniform() < 0.5 ? 0 : rng.index(8);
    cs[i].label_counts[rng.index(k)] += 1 + rng.index(4);
    for (auto v : cs[i].label_counts) cs[i].dataset_size += v;
  }
  return cs;
}

Partition random_partition(RandomSource& rng, std::size_t n, std::size_t m) {
  std::vector<std::size_t> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = i < m ? i : rng.index(m);
  rng.shuffle(a.begin(), a.end());
  return Partition(std::move(a), m);
}

ExperimentConfig scheduling_config() {
  ExperimentConfig c;
  c.learner = false;
  c.tau_g = 20000;
  return c;
}

// 1
Outcome formation_endpoint() {
  ExperimentConfig c;
  auto setup = build_setup(c);
  auto start = Clock::now();
  auto f = form_coalitions(c, setup);
  double elapsed = seconds_since(start);
  double init = f.trace.initial_avg_js, fin = f.trace.final_avg_js();
  return {std::abs(init - 0.6931) <= 0.005 && fin <= 1e-3 && elapsed <= 5.0,
          fmt("avg-JS %.6f -> %.3g in %.3f s (%zu switches)", init, fin, elapsed, f.trace.switches.size())};
}

struct FormationRun {
  std::vector<ClientProfile> clients;
  Partition initial;
  FormationResult result;
  std::vector<SwitchProposal> evaluated;
};

std::vector<FormationRun> seeded_formation_runs() {
  std::vector<FormationRun> runs;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    FormationRun r;
    RandomSource rng = RandomSource(seed).child("acceptance-formation");
    if (seed < 2) {
      ExperimentConfig c;
      c.seed = seed;
      auto setup = build_setup(c);
      r.clients = setup.clients;
      r.initial = setup.initial;
    } else {
      std::size_t n = 10 + rng.index(41), m = 2 + rng.index(5);
      r.clients = random_population(rng, n, 10);
      r.initial = random_partition(rng, n, m);
    }
    r.result = run_formation(r.initial, r.clients, 20000, rng,
                             [&](const SwitchProposal& p) { r.evaluated.push_back(p); });
    runs.push_back(std::move(r));
  }
  return runs;
}

// 2: replay each run; proposals of one iteration share the pre-switch partition.
Outcome potential_identity(const std::vector<FormationRun>& runs) {
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& r : runs) {
    const std::size_t m = r.initial.n_coalitions();
    std::vector<std::size_t> assign = r.initial.assignment();
    std::size_t next_switch = 0;
    for (const auto& p : r.evaluated) {
      while (next_switch < r.result.trace.switches.size() &&
             r.result.trace.switches[next_switch].iteration < p.iteration) {
        const auto& s = r.result.trace.switches[next_switch++];
        assign[s.client] = s.to;
      }
      if (!p.feasible) continue;
      auto moved = assign;
      moved[p.client] = p.to;
      double d_phi = potential_oracle(moved, m, r.clients) - potential_oracle(assign, m, r.clients);
      double d_u = p.delta_avg_js * pair_count(m);
      worst = std::max(worst, std::abs(d_u - d_phi));
      ++checked;
    }
  }
  return {runs.size() >= 10 && checked > 0 && worst <= 1e-9,
          fmt("%zu runs, %zu switches evaluated, max |dU - dPhi| = %.3g", runs.size(), checked, worst)};
}

// 3
Outcome monotone_trajectory(const std::vector<FormationRun>& runs) {
  std::size_t bad = 0, steps = 0;
  for (const auto& r : runs) {
    double prev = r.result.trace.initial_avg_js;
    for (double v : r.result.trace.js_history) {
      if (!(v < prev)) ++bad;
      prev = v;
      ++steps;
    }
  }
  return {bad == 0, fmt("%zu accepted switches over %zu runs, %zu non-decreasing steps", steps, runs.size(), bad)};
}

// 4
Outcome local_optimality() {
  auto start = Clock::now();
  RandomSource rng(404);
  std::size_t violations = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 3 + rng.index(6), m = 2 + rng.index(2);
    if (m > n) m = n;
    auto clients = random_population(rng, n, 2 + rng.index(4));
    auto init = random_partition(rng, n, m);
    auto res = run_formation(init, clients, 100000, rng);
    const auto& a = res.partition.assignment();
    double base = potential_oracle(a, m, clients);
    std::vector<std::size_t> sizes(m, 0);
    for (auto c : a) ++sizes[c];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t to = 0; to < m; ++to) {
        if (to == a[i] || sizes[a[i]] == 1) continue;
        auto moved = a;
        moved[i] = to;
        if (potential_oracle(moved, m, clients) < base - 1e-12) ++violations;
      }
  }
  double elapsed = seconds_since(start);
  return {violations == 0 && elapsed <= 10.0,
          fmt("50 instances, %zu improving single moves left, %.3f s", violations, elapsed)};
}

// 5 and 6 share the runs.
std::vector<SweepPoint> beta_runs() {
  return sweep(scheduling_config(), "beta", {0.5, 5, 50});
}

Outcome mean_rate_stability(const std::vector<SweepPoint>& pts) {
  bool ok = true;
  std::string detail;
  double prev_queue = -1.0;
  for (const auto& p : pts) {
    const auto& s = p.metrics.summary;
    double worst_rate = *std::max_element(s.mean_rate.begin(), s.mean_rate.end());
    // Plateau: the late-half peak backlog is no larger than twice the early-half peak.
    double early = 0.0, late = 0.0;
    const auto& rows = p.metrics.rounds;
    for (std::size_t t = 1; t < rows.size(); ++t) {
      double& peak = t < rows.size() / 2 ? early : late;
      for (double q : rows[t].lambda) peak = std::max(peak, q);
    }
    bool plateau = late <= 2.0 * early + 1.0;
    ok = ok && worst_rate <= 0.01 && plateau && s.max_queue >= prev_queue;
    prev_queue = s.max_queue;
    detail += fmt("beta=%g: max rate %.4g, max queue %.3g (early %.3g, late %.3g); ", p.value, worst_rate, s.max_queue,
                  early, late);
  }
  return {ok, detail};
}

Outcome long_term_balance(const std::vector<SweepPoint>& pts) {
  const auto& s = pts.front().metrics.summary;
  double margin = 1.0;
  for (std::size_t m = 0; m < s.delta.size(); ++m) margin = std::min(margin, s.participation[m] - s.delta[m]);
  return {margin >= -0.02, fmt("beta=0.5, kappa=1: min(participation - delta) = %.4f", margin)};
}

// 7: scheduler-only, every coalition available every round.
double time_average_efficiency(const std::vector<double>& latency, const std::vector<double>& delta, double beta,
                               long rounds, double interval) {
  auto state = make_queue_state(delta);
  state = update_queue(state, std::nullopt);
  std::vector<bool> available(latency.size(), true);
  double sum = 0.0;
  for (long t = 1; t <= rounds; ++t) {
    auto d = fedcure_select(state, latency, available, beta, interval);
    sum += 1.0 - latency[d.chosen] / interval;
    state = update_queue(state, d.chosen);
  }
  return sum / static_cast<double>(rounds);
}

double best_stationary_efficiency(const std::vector<double>& g, const std::vector<double>& delta) {
  double best = -1.0;
  for (int a = 0; a <= 100; ++a)
    for (int b = 0; a + b <= 100; ++b) {
      double p[3] = {a / 100.0, b / 100.0, (100 - a - b) / 100.0};
      bool feasible = true;
      for (int m = 0; m < 3; ++m) feasible = feasible && p[m] >= delta[m] - 1e-12;
      if (!feasible) continue;
      best = std::max(best, p[0] * g[0] + p[1] * g[1] + p[2] * g[2]);
    }
  return best;
}

Outcome drift_plus_penalty() {
  const std::vector<double> latency{1.5, 1.2, 1.0};
  const std::vector<double> delta{0.2, 0.2, 0.2};
  const double interval = *std::max_element(latency.begin(), latency.end());
  std::vector<double> g(3);
  for (int m = 0; m < 3; ++m) g[m] = 1.0 - latency[m] / interval;
  double g_star = best_stationary_efficiency(g, delta);
  bool ok = true;
  std::string detail = fmt("g* = %.4f; ", g_star);
  std::vector<double> gaps;
  for (double beta : {1.0, 10.0, 100.0}) {
    double avg = time_average_efficiency(latency, delta, beta, 20000, interval);
    double gap = std::abs(g_star - avg);
    gaps.push_back(gap);
    ok = ok && avg >= g_star - 1.0 / (2.0 * beta);
    detail += fmt("beta=%g: avg g %.5f (gap %.3g); ", beta, avg, gap);
  }
  ok = ok && gaps.back() * 5.0 <= gaps.front();
  return {ok, detail};
}

// 8
Outcome frequency_optimality() {
  RandomSource rng(8);
  double worst = 0.0;
  std::size_t clamped = 0, clamp_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    UtilityParams u{rng.uniform(0.1, 10), rng.uniform(0.01, 5), rng.uniform(1.0, 4.0)};
    double c = rng.uniform(0.1, 5), t_hat = rng.uniform(0.5, 20), f_max = rng.uniform(0.1, 3);
    double f = optimal_frequency(u, c, t_hat, f_max);
    double at_opt = utility(u, c, t_hat, f);
    double grid_best = -INFINITY;
    for (int i = 1; i <= 10000; ++i) grid_best = std::max(grid_best, utility(u, c, t_hat, f_max * i / 10000.0));
    worst = std::max(worst, grid_best - at_opt);
    if (interior_frequency(u, c, t_hat) >= f_max) {
      ++clamped;
      if (f != f_max) ++clamp_errors;
    }
  }
  return {worst <= 1e-9 && clamp_errors == 0,
          fmt("1000 draws, max grid excess %.3g, %zu clamped (%zu not exactly f_max)", worst, clamped, clamp_errors)};
}

// 9
Outcome cov_ordering() {
  const SchedulerKind kinds[3] = {SchedulerKind::FedCure, SchedulerKind::Fair, SchedulerKind::Greedy};
  double mean[3] = {0, 0, 0};
  const int seeds = 10;
  for (int k = 0; k < 3; ++k)
    for (int seed = 0; seed < seeds; ++seed) {
      ExperimentConfig c;
      c.learner = false;
      c.tau_g = 2000;
      c.kappa = 0.5;
      c.seed = static_cast<std::uint64_t>(seed);
      c.scheduler_kind = kinds[k];
      mean[k] += run_experiment(c).metrics.summary.cov / seeds;
    }
  return {mean[0] < mean[1] && mean[2] <= mean[0],
          fmt("mean COV over %d seeds: FedCure %.5f, Fair %.5f, Greedy %.5f", seeds, mean[0], mean[1], mean[2])};
}

// 10
Outcome accuracy_direction() {
  ExperimentConfig c;
  auto formed = run_experiment(c, false).metrics.summary;
  auto initial = run_experiment(c, true).metrics.summary;
  return {formed.final_accuracy > initial.final_accuracy && formed.final_loss < initial.final_loss,
          fmt("formed acc %.4f loss %.4f vs initial acc %.4f loss %.4f", formed.final_accuracy, formed.final_loss,
              initial.final_accuracy, initial.final_loss)};
}

// 11
Outcome estimator_consistency() {
  ExperimentConfig c;
  c.noise_sigma = 0.3;
  double total = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    auto setup = build_setup(c);
    for (std::size_t m = 0; m < setup.initial.n_coalitions(); ++m) {
      auto members = setup.initial.members(m);
      std::vector<double> freqs;
      for (auto n : members) freqs.push_back(setup.clients[n].f_max);
      double truth = nominal_latency(setup.latency, members, freqs) * std::exp(0.5 * c.noise_sigma * c.noise_sigma) +
                     setup.latency.edge_cloud_delay[m];
      RandomSource rng = RandomSource(seed).child("estimator", m);
      auto belief = belief_from_first_observation(realize_latency(setup.latency, m, members, freqs, rng), c.noise_sigma);
      for (int i = 0; i < 200; ++i) belief = update_belief(belief, realize_latency(setup.latency, m, members, freqs, rng));
      total += std::abs(estimate(belief) - truth) / truth;
      ++count;
    }
  }
  double avg = total / static_cast<double>(count);
  return {avg <= 0.05, fmt("mean relative error %.4f over 20 seeds x %zu coalitions", avg, count / 20)};
}

// 12
Outcome gradient_check() {
  RandomSource rng(12);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t k = 2 + rng.index(6), d = 1 + rng.index(8);
    auto ds = generate(k, d, 4, 1, rng.uniform(0.0, 3.0), rng);
    ModelParams model = ModelParams::zeros(k, d);
    for (auto& w : model.w) w = rng.normal();
    std::vector<std::size_t> batch(1 + rng.index(8));
    for (auto& i : batch) i = rng.index(ds.train.size());
    auto g = gradient(model, ds.train, batch);
    const double h = 1e-5;
    double diff = 0.0, norm = 0.0;
    for (std::size_t p = 0; p < model.w.size(); ++p) {
      auto up = model, dn = model;
      up.w[p] += h;
      dn.w[p] -= h;
      double fd = (loss(up, ds.train, batch) - loss(dn, ds.train, batch)) / (2 * h);
      diff += (g[p] - fd) * (g[p] - fd);
      norm += std::max(g[p] * g[p], fd * fd);
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  return {worst <= 1e-5, fmt("100 instances, max relative error %.3g", worst)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    auto start = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  };

  report(1, "formation endpoint", formation_endpoint);
  auto runs = seeded_formation_runs();
  report(2, "exact potential identity", [&] { return potential_identity(runs); });
  report(3, "monotone trajectory", [&] { return monotone_trajectory(runs); });
  report(4, "local optimality", local_optimality);
  std::vector<SweepPoint> betas;
  try {
    betas = beta_runs();
  } catch (const std::exception& e) {
    std::printf("beta sweep failed: %s\n", e.what());
  }
  report(5, "mean rate stability", [&] { return betas.size() == 3 ? mean_rate_stability(betas) : Outcome{}; });
  report(6, "long-term balance", [&] { return betas.size() == 3 ? long_term_balance(betas) : Outcome{}; });
  report(7, "drift-plus-penalty gap", drift_plus_penalty);
  report(8, "frequency optimality", frequency_optimality);
  report(9, "COV ordering", cov_ordering);
  report(10, "accuracy direction", accuracy_direction);
  report(11, "estimator consistency", estimator_consistency);
  report(12, "gradient check", gradient_check);

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
