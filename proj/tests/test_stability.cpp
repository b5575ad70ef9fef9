#include <gtest/gtest.h>

#include <cmath>

#include "qnet/fixtures.hpp"
#include "qnet/stability.hpp"

using namespace qnet;

namespace {

// ⟨π, e^{−‖·‖}⟩ for a stable M/M/1 queue: Σ (1−ρ)ρ^n e^{−n}.
double mm1_equilibrium(double rho) { return (1 - rho) / (1 - rho / std::exp(1.0)); }

}  // namespace

TEST(Phi, Examples) {
  const Network mm1 = fixture_network("mm1");
  const CounterStream rng(1);
  const auto zero = phi_estimate(mm1, 0, 1.0, 100, rng, 1);
  EXPECT_EQ(zero.mean, 1.0);
  EXPECT_EQ(zero.std_error, 0.0);

  const double exact = 6.0 / 9 + 2.0 / 9 * std::exp(-1) + 1.0 / 9 * std::exp(-2);
  const auto e = phi_estimate(mm1, 2, 1.0, 100000, rng, 2);
  EXPECT_LE(std::abs(e.mean - exact), 4 * e.std_error);
  EXPECT_EQ(e.reps, 100000);

  const Network idle = mm1.with_theta({0});
  for (int n : {1, 5, 40}) EXPECT_EQ(phi_estimate(idle, n, 1.0, 50, rng, 1).mean, 1.0);
  EXPECT_THROW(phi_estimate(mm1, 2, 0.0, 10, rng, 1), InvalidArgument);
  EXPECT_THROW(phi_estimate(mm1, 2, 1.0, 0, rng, 1), InvalidArgument);
}

TEST(Phi, ThreadCountDoesNotChangeResults) {
  const Network lk = fixture_network("lk-prop");
  const CounterStream rng(42);
  const auto a = phi_estimates(lk, empty_state(lk), {10, 50}, 0.5, 3000, rng, 1);
  const auto b = phi_estimates(lk, empty_state(lk), {10, 50}, 0.5, 3000, rng, 4);
  for (std::size_t j = 0; j < a.size(); ++j) {
    EXPECT_EQ(a[j].mean, b[j].mean);
    EXPECT_EQ(a[j].std_error, b[j].std_error);
  }
}

TEST(PhiExact, Examples) {
  const Network mm1 = fixture_network("mm1");
  EXPECT_NEAR(phi_exact(mm1, 2), 6.0 / 9 + 2.0 / 9 * std::exp(-1) + 1.0 / 9 * std::exp(-2), 1e-15);
  EXPECT_EQ(phi_exact(mm1, 0), 1.0);
  const Network lk = fixture_network("lk-prop");
  const double a4 = phi_exact(lk.scaled(0.5), 4), a8 = phi_exact(lk.scaled(0.5), 8);
  const double b4 = phi_exact(lk.scaled(1.0), 4), b8 = phi_exact(lk.scaled(1.0), 8);
  EXPECT_LE(a8, a4 + 1e-10);
  EXPECT_LE(b8, b4 + 1e-10);
  EXPECT_LE(b4, a4 + 1e-10);
  EXPECT_LE(b8, a8 + 1e-10);
}

TEST(Table, ExactExamples) {
  const CounterStream rng(1);
  const auto mm1 = monotonicity_table(fixture_network("mm1"), {0.5, 1.0, 1.5}, {2, 4, 8}, 1.0, TableMode::exact, 0,
                                      rng);
  EXPECT_TRUE(mm1.violations.empty());
  ASSERT_EQ(mm1.value.size(), 3u);
  EXPECT_NEAR(mm1.value[1][0], phi_exact(fixture_network("mm1"), 2), 1e-15);
  const auto fr = monotonicity_table(fixture_network("fcfs-reentrant"), {0.5, 1.0}, {2, 4, 8}, 1.0,
                                     TableMode::exact, 0, rng);
  EXPECT_TRUE(fr.violations.empty());
  EXPECT_THROW(monotonicity_table(fixture_network("mm1"), {1.0, 0.5}, {2}, 1.0, TableMode::exact, 0, rng),
               InvalidArgument);
}

TEST(Table, ViolationsAreReported) {
  MonotonicityTable t;
  t.scales = {1, 2};
  t.steps = {1, 2};
  t.value = {{0.9, 0.95}, {0.8, 0.7}};
  t.std_error = {{0, 0}, {0, 0}};
  find_violations(t);
  ASSERT_EQ(t.violations.size(), 1u);
  EXPECT_EQ(t.violations[0].row, 0u);
  EXPECT_EQ(t.violations[0].col, 1u);
  EXPECT_EQ(t.violations[0].direction, TableViolation::Direction::in_n);

  t.mode = TableMode::mc;
  t.std_error = {{0.02, 0.02}, {0.02, 0.02}};
  t.violations.clear();
  find_violations(t);  // 0.05 is inside 3·√2·0.02
  EXPECT_TRUE(t.violations.empty());
}

TEST(Cycles, Examples) {
  const CounterStream rng(8);
  const Network mm1 = fixture_network("mm1");
  const auto stable = cycle_estimate(mm1, 100000, 2000, rng, 2);
  EXPECT_EQ(stable.censor_fraction, 0.0);
  // From ∅: a geometric wait for the first arrival (mean λ/θ = 3 steps), then
  // the busy period, which lasts 1/(β−θ) time units, i.e. 3 embedded steps per time unit.
  EXPECT_NEAR(stable.mean_return, 3.0 + 3.0 / (2 - 1), 5 * stable.std_error);
  // Overloaded: the walk from one job never returns to ∅ with probability 1 − β/θ.
  const auto unstable = cycle_estimate(mm1.with_theta({3}), 100000, 400, rng, 2);
  EXPECT_NEAR(unstable.censor_fraction, 1.0 / 3, 4 * std::sqrt(2.0 / 9 / 400));
  EXPECT_TRUE(cycle_estimate(mm1.with_theta({0}), 10, 10, rng, 1).degenerate);
  EXPECT_THROW(cycle_estimate(mm1, 0, 10, rng, 1), InvalidArgument);
}

TEST(Cycles, RayProfileIsMonotone) {
  const Network mm1 = fixture_network("mm1");
  const auto [pts, monotone] = ray_stability_profile(mm1, {1}, {0.5, 1.0, 1.5, 3.0, 10.0}, 20000, 100, CounterStream(3), 2);
  EXPECT_TRUE(monotone);
  EXPECT_TRUE(pts.front().stable);
  EXPECT_FALSE(pts.back().stable);
}

TEST(Search, SyntheticBisection) {
  const auto r = bisect_threshold([](double a) { return std::max(0.0, 1 - a); }, 0.25);
  EXPECT_NEAR(r.threshold, 0.75, 1e-6);
  // the bracket shrinks around the root
  double lo = 0, hi = 1e9;
  for (auto& p : r.trace) {
    if (p.value >= 0.25) lo = std::max(lo, p.scale);
    else hi = std::min(hi, p.scale);
  }
  EXPECT_LE(lo, 0.75);
  EXPECT_GE(hi, 0.75);
  EXPECT_THROW(bisect_threshold([](double) { return 0.9; }, 0.25), BracketFailure);
  for (double eps : {0.0, 1.0, -0.5, 2.0})
    EXPECT_THROW(bisect_threshold([](double a) { return 1 / (1 + a); }, eps), InvalidArgument);
}

TEST(Search, SyntheticRobbinsMonro) {
  CounterStream noise(31);
  std::vector<double> u(10000);
  for (double& x : u) x = noise.uniform() - 0.5;  // bounded, zero mean
  const auto r = robbins_monro_threshold([&](double a, int m) { return 1 / (1 + a) + 0.2 * u[m]; }, 0.5,
                                         {.c = 4, .m0 = 10, .initial_scale = 3});
  EXPECT_NEAR(r.threshold, 1.0, 0.05);

  RobbinsMonroOptions still;
  still.initial_scale = 2.5;
  still.iterations = 100;
  const auto flat = robbins_monro_threshold([](double, int) { return 0.3; }, 0.3, still);
  for (auto& p : flat.trace) EXPECT_EQ(p.scale, 2.5);
  EXPECT_EQ(flat.threshold, 2.5);
}

TEST(Search, DirectionChecks) {
  const Network t2 = fixture_network("tandem2");
  const StatisticalSearch s{10, 1.0, 10, 1};
  const CounterStream rng(1);
  EXPECT_THROW(threshold_bisection(t2, {1}, 0.2, s, rng), InvalidArgument);
  EXPECT_THROW(threshold_bisection(t2, {0, 0}, 0.2, s, rng), InvalidArgument);
  EXPECT_THROW(threshold_bisection(t2, {-1, 1}, 0.2, s, rng), InvalidArgument);
  EXPECT_THROW(threshold_bisection(t2, {1, 0}, 1.2, s, rng), InvalidArgument);
  EXPECT_NEAR(subcritical_scale(t2, {1, 0}), 2.0, 1e-12);
  EXPECT_NEAR(subcritical_scale(t2, {0, 1}), 3.0, 1e-12);
}

TEST(Search, Mm1Statistical) {
  const Network mm1 = fixture_network("mm1");
  const double target = 2 * 0.8 / (1 - 0.2 / std::exp(1.0));
  StatisticalSearch s;
  s.horizon = 2000;
  s.reps = 1000;
  s.threads = 2;
  BisectionOptions opt;
  opt.iterations = 10;
  const auto r = threshold_bisection(mm1, {1}, 0.2, s, CounterStream(5), opt);
  EXPECT_NEAR(r.threshold, target, 0.1 * target);
  EXPECT_EQ(r.horizon, 2000);
  EXPECT_EQ(r.method, SearchMethod::bisection);
}

TEST(Region, SingleRayAndQuadrant) {
  const Network t2 = fixture_network("tandem2");
  const auto one = quadrant_rays(t2, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], (std::vector<double>{1, 0}));
  const auto five = quadrant_rays(t2, 5);
  ASSERT_EQ(five.size(), 5u);
  EXPECT_EQ(five.back(), (std::vector<double>{0, 1}));
  for (auto& v : five) EXPECT_NEAR(std::hypot(v[0], v[1]), 1.0, 1e-15);

  StatisticalSearch s{200, 1.0, 200, 1};
  BisectionOptions opt;
  opt.iterations = 6;
  const auto scan = region_scan(t2, one, 0.3, s, CounterStream(2), opt);
  ASSERT_EQ(scan.rays.size(), 1u);
  ASSERT_EQ(scan.polygon.size(), 2u);
  EXPECT_EQ(scan.coordinates, (std::vector<int>{1}));
  EXPECT_NEAR(scan.polygon[1][0], scan.rays[0].search.threshold, 1e-15);
  EXPECT_NEAR(scan.subcritical_polygon[1][0], 2.0, 1e-12);
}

TEST(LongRun, Mm1Equilibrium) {
  const auto e = long_run_average(fixture_network("mm1"), 400000, 10000, 40, 1.0, CounterStream(17));
  EXPECT_LE(std::abs(e.mean - mm1_equilibrium(0.5)), 3 * e.std_error);
  EXPECT_NEAR(mm1_equilibrium(0.5), 0.6127, 1e-4);
  EXPECT_THROW(long_run_average(fixture_network("mm1"), 10, 0, 1, 1.0, CounterStream(1)), InvalidArgument);
}

TEST(Growth, MeanNormIncreasesWhenOverloaded) {
  const Network over = fixture_network("mm1").with_theta({3});
  const auto g = mean_norm_growth(over, {100, 1000}, 200, CounterStream(6), 2);
  // drift (θ−β)/λ = 0.2 jobs per step
  EXPECT_NEAR(g[1].mean, 0.2 * 1000, 6 * g[1].std_error + 5);
  EXPECT_GT(g[1].mean, 5 * g[0].mean);
}
