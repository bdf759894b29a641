#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fedcure/experiment.hpp"

using namespace fedcure;
using Catch::Approx;

namespace {

ExperimentConfig quick() {
  ExperimentConfig c;
  c.n_clients = 20;
  c.n_edges = 4;
  c.n_classes = 8;
  c.tau_g = 60;
  c.dim = 8;
  c.train_per_class = 40;
  c.test_per_class = 10;
  return c;
}

std::string rounds_text(const RunMetrics& m) {
  std::ostringstream o;
  write_rounds_csv(o, m.rounds, m.n_coalitions);
  write_formation_csv(o, m.formation);
  write_allocations_csv(o, m.allocations);
  o << summary_to_json(m).dump();
  return o.str();
}

}  // namespace

TEST_CASE("identical configs give byte-identical metrics") {
  auto a = run_experiment(quick()), b = run_experiment(quick());
  CHECK(rounds_text(a.metrics) == rounds_text(b.metrics));
  auto c = quick();
  c.seed = 9;
  CHECK(rounds_text(run_experiment(c).metrics) != rounds_text(a.metrics));
}

TEST_CASE("scheduler choice does not touch the formation phase") {
  auto c = quick();
  auto fed = run_experiment(c);
  c.scheduler_kind = SchedulerKind::Greedy;
  auto greedy = run_experiment(c);
  CHECK(fed.partition == greedy.partition);
  std::ostringstream fa, fb;
  write_formation_csv(fa, fed.metrics.formation);
  write_formation_csv(fb, greedy.metrics.formation);
  CHECK(fa.str() == fb.str());
  bool differs = false;
  for (std::size_t i = 0; i < fed.metrics.rounds.size(); ++i)
    differs = differs || fed.metrics.rounds[i].chosen != greedy.metrics.rounds[i].chosen;
  CHECK(differs);
}

TEST_CASE("formation endpoint matches the global label marginal") {
  ExperimentConfig c;
  c.learner = false;
  c.tau_g = 5;
  auto r = run_experiment(c);
  REQUIRE(r.metrics.formation.final_avg_js() <= 1e-6);
  auto dists = coalition_distributions(r.partition, r.setup.clients);
  std::vector<double> global(static_cast<std::size_t>(c.n_classes), 0.0);
  double total = 0.0;
  for (const auto& cl : r.setup.clients)
    for (std::size_t k = 0; k < global.size(); ++k) {
      global[k] += static_cast<double>(cl.label_counts[k]);
      total += static_cast<double>(cl.label_counts[k]);
    }
  for (const auto& d : dists)
    for (std::size_t k = 0; k < global.size(); ++k) CHECK(d[k] == Approx(global[k] / total).margin(1e-6));
}

TEST_CASE("skipping formation simulates the initial partition") {
  auto r = run_experiment(quick(), true);
  CHECK(r.partition == r.setup.initial);
  CHECK(r.metrics.formation.switches.empty());
  CHECK(r.metrics.summary.final_avg_js == Approx(r.metrics.summary.initial_avg_js));
}

TEST_CASE("sweeps") {
  auto c = quick();
  c.learner = false;
  c.tau_g = 3000;
  SECTION("beta: longer queues for larger beta") {
    auto pts = sweep(c, "beta", {0.5, 5, 50});
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].metrics.summary.max_queue <= pts[1].metrics.summary.max_queue);
    CHECK(pts[1].metrics.summary.max_queue <= pts[2].metrics.summary.max_queue);
  }
  SECTION("kappa: participation floor scales with kappa") {
    auto pts = sweep(c, "kappa", {0, 0.5, 1});
    for (const auto& p : pts) {
      const auto& s = p.metrics.summary;
      for (std::size_t m = 0; m < s.delta.size(); ++m) {
        CHECK(s.delta[m] == Approx(p.value * s.delta[m] / std::max(p.value, 1e-300)).margin(1e-12));
        CHECK(s.participation[m] >= s.delta[m] - 0.02);
      }
    }
    CHECK(pts[1].metrics.summary.delta[0] == Approx(0.5 * pts[2].metrics.summary.delta[0]));
  }
  SECTION("integer fields accept integral values") {
    auto pts = sweep(c, "tau_g", {10, 20});
    CHECK(pts[1].metrics.rounds.size() == 21);
  }
  SECTION("errors and empty lists") {
    CHECK(sweep(c, "beta", {}).empty());
    try {
      sweep(c, "no_such_field", {1});
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
    CHECK_THROWS_AS(sweep(c, "scheduler_kind", {1}), Error);
    CHECK_THROWS_AS(sweep(c, "beta", {-1}), Error);
  }
}
