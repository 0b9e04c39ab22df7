#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctrw/simulator.hpp"
#include "ctrw/solver.hpp"
#include "support.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace ctrw;

namespace {

ProbeOptions options(std::size_t replicas, std::uint64_t seed, unsigned threads = 1) {
  ProbeOptions o;
  o.replicas = replicas;
  o.seed = seed;
  o.threads = threads;
  return o;
}

bool within_4se(const MeanEstimate& e, double want) { return std::abs(e.mean - want) <= 4.0 * e.std_error; }

}  // namespace

TEST_CASE("single trajectories", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.7);
  const auto w = test::markov_const(2.0);
  RandomStream rng(1, 0, 0);

  StopRule at_start;
  at_start.targets = {0};
  at_start.record_path = true;
  const auto r0 = simulate(c, w, 0, at_start, rng);
  REQUIRE(r0.hits.sigma[0].has_value());
  CHECK(*r0.hits.sigma[0] == 0.0);
  CHECK(r0.path.states.size() == 1);
  CHECK(r0.hits.steps == 0);

  const auto sure = ChainSpec::homogeneous(1.0 - 1e-12);
  const auto unit = WaitingSpec::symmetric(DistModel::deterministic(1.0));
  StopRule five;
  five.targets = {5};
  five.record_path = true;
  const auto r5 = simulate(sure, unit, 0, five, rng);
  REQUIRE(r5.hits.sigma[0].has_value());
  CHECK(*r5.hits.sigma[0] == 5.0);
  CHECK(r5.path.states == std::vector<StateIndex>{0, 1, 2, 3, 4, 5});
  CHECK(r5.path.jump_times == std::vector<double>{0, 1, 2, 3, 4, 5});

  StopRule none;
  CHECK_THROWS_AS(simulate(c, w, 0, none, rng), ArgumentError);
}

TEST_CASE("caps censor runs", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.3);
  const auto w = test::markov_const(1.0);
  RandomStream rng(2, 0, 0);
  StopRule s;
  s.targets = {50};
  s.step_cap = 100;
  auto r = simulate(c, w, 0, s, rng);
  CHECK(r.hits.censor == CensorCause::StepCap);
  CHECK_FALSE(r.hits.sigma[0].has_value());
  CHECK(r.hits.steps == 100);

  s.step_cap = kDefaultStepCap;
  s.time_cap = 3.0;
  r = simulate(c, w, 0, s, rng);
  CHECK(r.hits.censor == CensorCause::TimeCap);
  CHECK(r.hits.final_time == 3.0);

  s.time_cap.reset();
  s.level_cap = 2;
  s.targets = {};
  r = simulate(ChainSpec::homogeneous(0.9), w, 0, s, rng);
  CHECK(r.hits.censor == CensorCause::LevelCap);
  CHECK(r.hits.final_state == 2);
}

TEST_CASE("hitting probe against the solver", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.7);
  const auto w = test::markov_const(2.0);
  const auto est = hitting_probe(c, w, 0, 3, options(100000, 17));
  const double f = solve_hitting_transform(c, w, 3).values[0];
  INFO("mc=" << est.transform.mean << " se=" << est.transform.std_error << " solver=" << f);
  CHECK(est.censored == 0);
  CHECK(est.transform.count == 100000);
  CHECK(within_4se(est.transform, f));
}

TEST_CASE("censored replicas are excluded and counted", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.5);
  auto opt = options(2000, 3);
  opt.time_cap = 5.0;
  const auto est = hitting_probe(c, test::markov_const(1.0), 0, 10, opt);
  CHECK(est.censored > 0);
  CHECK(est.transform.count + est.censored == est.replicas);
  std::size_t missing = 0;
  for (const auto& s : est.sigma) missing += !s.has_value();
  CHECK(missing == est.censored);
}

TEST_CASE("results do not depend on thread count", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.6);
  const auto w = test::stable(0.5, 1.0);
  const auto a = hitting_probe(c, w, 0, 8, options(3000, 99, 1));
  const auto b = hitting_probe(c, w, 0, 8, options(3000, 99, 4));
  REQUIRE(a.sigma.size() == b.sigma.size());
  for (std::size_t r = 0; r < a.sigma.size(); ++r) REQUIRE(a.sigma[r] == b.sigma[r]);
  CHECK(a.transform.mean == b.transform.mean);

  const auto other = hitting_probe(c, w, 0, 8, options(3000, 100, 1));
  CHECK(other.transform.mean != a.transform.mean);
}

TEST_CASE("rank test", "[simulator]") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  // U = 0, mean 4.5, variance 5.25
  CHECK_THAT(mann_whitney_p_value(a, b), WithinRel(std::erfc(4.5 / std::sqrt(5.25) / std::sqrt(2.0)), 1e-12));
  CHECK(mann_whitney_p_value(a, a) == 1.0);
  CHECK_THROWS_AS(mann_whitney_p_value(a, std::vector<double>{}), ArgumentError);

  RandomStream rng(4, 0, 0);
  std::vector<double> x(2000), y(2000);
  for (double& v : x) v = rng.exponential();
  for (double& v : y) v = 1.2 * rng.exponential();
  CHECK(mann_whitney_p_value(x, y) < 1e-3);
}

TEST_CASE("hitting time equals the sum of upward passages in law", "[simulator]") {
  const auto c = ChainSpec::homogeneous(0.6);
  const auto w = test::stable(0.7, 1.0);
  const std::vector<StateIndex> levels{3, 10, 30};
  const std::size_t replicas = 4000;
  for (StateIndex n : levels) {
    const auto direct = hitting_probe(c, w, 0, n, options(replicas, 2024));
    std::vector<double> joined(replicas), pieces(replicas);
    WalkCache cache(c, w);
    ProbeOptions opt = options(replicas, 2024);
    for (std::size_t r = 0; r < replicas; ++r) {
      joined[r] = *direct.sigma[r];
      double sum = 0.0;
      for (StateIndex k = 1; k <= n; ++k) {
        RandomStream rng(opt.seed + 1, r, kRolePassageBase + static_cast<std::uint32_t>(k));
        const HittingSample h = upward_passage(cache, k, opt, rng);
        REQUIRE(h.sigma[0].has_value());
        sum += *h.sigma[0];
      }
      pieces[r] = sum;
    }
    INFO("n=" << n);
    CHECK(mann_whitney_p_value(joined, pieces) > 0.01 / static_cast<double>(levels.size()));
  }
}

TEST_CASE("embedded exit frequencies", "[simulator]") {
  const auto sym = ChainSpec::homogeneous(0.5);
  const auto e = embedded_exit_mc(sym, 0, 1, 3, options(100000, 8));
  CHECK(std::abs(e.right - 1.0 / 3.0) <= 4.0 * e.std_error);
  CHECK_THAT(e.right + e.left, WithinAbs(1.0, 1e-15));

  const auto c = ChainSpec::homogeneous(0.7);
  const auto one = embedded_exit_mc(c, 0, 1, 2, options(100000, 9));
  CHECK(std::abs(one.right - 0.7) <= 4.0 * one.std_error);

  const auto sure = embedded_exit_mc(ChainSpec::homogeneous(1.0 - 1e-12), 3, 9, 10, options(1000, 1));
  CHECK(sure.right == 1.0);

  std::vector<signed char> sides;
  embedded_exit_mc(sym, 2, 5, 9, options(500, 3), &sides);
  CHECK(sides.size() == 500);
  CHECK_THROWS_AS(embedded_exit_mc(sym, 2, 2, 9, options(10, 3)), ArgumentError);
}

TEST_CASE("explosion probe", "[simulator]") {
  const std::vector<StateIndex> grid{100, 1000, 10000};
  const auto w = test::stable(0.5, 3.0);

  SECTION("exploding configuration") {
    auto opt = options(400, 11);
    opt.time_cap = 1e6;
    const auto e = explosion_probe(ChainSpec::homogeneous(0.7), w, 0, grid, opt);
    CHECK(e.fraction_top >= 0.99);
    REQUIRE(e.median_increments.size() == 2);
    CHECK(e.median_increments[1] < e.median_increments[0]);
    CHECK(e.stabilizing);
  }
  SECTION("recurrent configuration") {
    auto opt = options(100, 12);
    opt.time_cap = 1e3;
    const auto e = explosion_probe(ChainSpec::homogeneous(0.3), w, 0, grid, opt);
    CHECK(e.fraction_top == 0.0);
    CHECK(e.censored == 100);
  }
  SECTION("deterministic clock grows linearly") {
    auto opt = options(20, 13);
    opt.time_cap = 1e9;
    const auto e = explosion_probe(ChainSpec::homogeneous(1.0 - 1e-12), WaitingSpec::symmetric(DistModel::deterministic(1.0)),
                                   0, grid, opt);
    CHECK(e.fraction_top == 1.0);
    CHECK(e.levels[0].median_sigma == 100.0);
    CHECK(e.levels[2].median_sigma == 10000.0);
    CHECK_FALSE(e.stabilizing);
  }
  SECTION("a time cap is required") {
    CHECK_THROWS_AS(explosion_probe(ChainSpec::homogeneous(0.7), w, 0, grid, options(10, 1)), ArgumentError);
    auto opt = options(10, 1);
    opt.time_cap = 1.0;
    CHECK_THROWS_AS(explosion_probe(ChainSpec::homogeneous(0.7), w, 0, {10, 5}, opt), ArgumentError);
  }
}

TEST_CASE("implosion probe", "[simulator]") {
  SECTION("single passage against the windowed solver") {
    const auto c = ChainSpec::homogeneous(0.4);
    const auto w = test::markov(2.0);
    const auto probe = implosion_probe(c, w, 1, options(100000, 21));
    std::vector<double> xs;
    for (const auto& row : probe.theta) xs.push_back(std::exp(-row[0]));
    const MeanEstimate e = mean_estimate(xs);
    const double want = 1.0 - solve_two_sided_transform(c, w, 0, 200).values[1];
    INFO("mc=" << e.mean << " se=" << e.std_error << " solver=" << want);
    CHECK(within_4se(e, want));
    CHECK(probe.censored_passages == 0);
  }
  SECTION("imploding configuration stabilizes") {
    const auto probe = implosion_probe(ChainSpec::homogeneous(0.4), test::stable(0.5, 5.0), 200, options(400, 22), {50, 100, 200});
    REQUIRE(probe.grid.size() == 3);
    CHECK(probe.grid[2].censored == 0);
    CHECK(probe.grid[2].median_lower == probe.grid[2].median_upper);
    CHECK_THAT(probe.grid[2].median_lower, WithinRel(probe.grid[1].median_lower, 0.05));
  }
  SECTION("non-imploding configuration keeps growing") {
    const auto probe = implosion_probe(ChainSpec::homogeneous(0.4), test::markov(0.5), 400, options(200, 23));
    REQUIRE(probe.grid.size() == 3);
    CHECK(probe.grid[1].median_lower > 1.2 * probe.grid[0].median_lower);
    CHECK(probe.grid[2].median_lower > 1.2 * probe.grid[1].median_lower);
  }
  SECTION("symmetric walk with censoring brackets the medians") {
    auto opt = options(100, 24);
    opt.step_cap = 100000;
    const auto probe = implosion_probe(ChainSpec::homogeneous(0.5), test::markov(1.0), 100, opt);
    for (const auto& g : probe.grid) CHECK(g.median_lower <= g.median_upper);
    if (probe.censored_passages > 0) CHECK(probe.warning.has_value());
  }
  SECTION("transient chains are flagged") {
    auto opt = options(20, 25);
    opt.step_cap = 2000;
    const auto probe = implosion_probe(ChainSpec::homogeneous(0.7), test::markov(2.0), 10, opt);
    REQUIRE(probe.warning.has_value());
    CHECK(probe.censored_passages > 0);
    std::size_t flagged = 0;
    for (const auto& row : probe.theta_censored) flagged += std::count(row.begin(), row.end(), true);
    CHECK(flagged == probe.censored_passages);
  }
}
