#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "fedcure/resource.hpp"

using namespace fedcure;
using Catch::Approx;

TEST_CASE("utility examples") {
  UtilityParams p{1, 1, 2};
  CHECK(utility(p, 1, 1, 1) == Approx(-1.0));
  CHECK(utility(p, 1, 1, 1e4) < -1e7);
  CHECK(utility(p, 1, 1, 1e-6) < -1e5);
  try {
    utility(p, 1, 1, 0.0);
    FAIL("expected InvalidFrequency");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidFrequency);
  }
  CHECK_THROWS_AS(utility(p, 1, 1, -1.0), Error);
}

TEST_CASE("optimal frequency examples") {
  UtilityParams p{1, 1, 2};
  CHECK(optimal_frequency(p, 8, 1, 2) == Approx(std::cbrt(4.0)).epsilon(1e-12));
  CHECK(optimal_frequency(p, 8, 1, 2) == Approx(1.5874).margin(1e-4));
  CHECK(optimal_frequency(p, 8, 1, 1) == 1.0);
}

TEST_CASE("optimal frequency beats a dense grid") {
  RandomSource rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    UtilityParams p{rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(1, 4)};
    double c = rng.uniform(0.1, 10), t = rng.uniform(0.1, 10), fmax = rng.uniform(0.1, 5);
    double fs = optimal_frequency(p, c, t, fmax);
    double u = utility(p, c, t, fs);
    for (int i = 1; i <= 10000; ++i) REQUIRE(u >= utility(p, c, t, fmax * i * 1e-4) - 1e-9);
  }
}

TEST_CASE("concavity witness, monotonicity and clamp") {
  RandomSource rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    UtilityParams p{rng.uniform(0.1, 10), rng.uniform(0.1, 10), rng.uniform(1, 4)};
    double c = rng.uniform(0.1, 10), t = rng.uniform(0.1, 10);
    double fi = interior_frequency(p, c, t);
    double h = 1e-3 * fi;
    REQUIRE(utility(p, c, t, fi + h) < utility(p, c, t, fi));
    REQUIRE(utility(p, c, t, fi - h) < utility(p, c, t, fi));

    const double big = std::numeric_limits<double>::max();
    REQUIRE(optimal_frequency(p, c, 2 * t, big) <= fi);
    REQUIRE(optimal_frequency({p.alpha, 2 * p.gamma, p.varsigma}, c, t, big) <= fi);
    REQUIRE(optimal_frequency({2 * p.alpha, p.gamma, p.varsigma}, c, t, big) >= fi);
    REQUIRE(optimal_frequency(p, 2 * c, t, big) >= fi);
    REQUIRE(optimal_frequency(p, c, 2 * t, big) == Approx(fi * std::pow(2.0, -1.0 / (p.varsigma + 1))).epsilon(1e-12));

    double fmax = fi * rng.uniform(0.1, 0.99);
    REQUIRE(optimal_frequency(p, c, t, fmax) == fmax);
  }
}

TEST_CASE("apply_allocation") {
  UtilityParams p{1, 1, 2};
  std::vector<ClientProfile> cs(3);
  for (std::size_t i = 0; i < 3; ++i) {
    cs[i].id = i;
    cs[i].comp_load = 8.0;
    cs[i].f_max = 2.0;
  }
  cs[2].f_max = 1e-3;
  std::vector<std::size_t> members{0, 1, 2};
  auto a = apply_allocation(members, cs, p, 1.0);
  REQUIRE(a.size() == 3);
  CHECK(a[0].freq == a[1].freq);
  CHECK_FALSE(a[0].clamped);
  CHECK(a[2].freq == 1e-3);
  CHECK(a[2].clamped);
  auto b = apply_allocation(members, cs, p, 2.0);
  CHECK(b[0].freq == Approx(a[0].freq * std::pow(2.0, -1.0 / 3.0)).epsilon(1e-12));
}
