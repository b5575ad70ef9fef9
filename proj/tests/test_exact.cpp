#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <map>

#include "generators.hpp"
#include "qnet/exact.hpp"
#include "qnet/fixtures.hpp"

using namespace qnet;
using qnet::testing::all_states;
using qnet::testing::state;

namespace {

// E exp(−X_t) for the M/M/1 queue truncated at `cap`, from the generator's
// matrix exponential. Shares nothing with the uniformization code.
double mm1_oracle(double theta, double beta, double t, int cap) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cap + 1, cap + 1);
  for (int n = 0; n <= cap; ++n) {
    if (n < cap) a(n, n + 1) = theta;
    if (n > 0) a(n, n - 1) = beta;
    a(n, n) = -a.row(n).sum();
  }
  const Eigen::MatrixXd p = (a * t).exp();
  double v = 0;
  for (int n = 0; n <= cap; ++n) v += p(0, n) * std::exp(-n);
  return v;
}

std::vector<double> cdf(const std::vector<double>& law, std::size_t len) {
  std::vector<double> c(len, 0.0);
  double acc = 0;
  for (std::size_t m = 0; m < len; ++m) {
    if (m < law.size()) acc += law[m];
    c[m] = acc;
  }
  return c;
}

const auto exp_phi = [](const NetworkState& s) { return exp_norm(s); };

}  // namespace

TEST(Exact, Mm1TwoSteps) {
  const Network mm1 = fixture_network("mm1");
  const auto d = exact_step_distribution(mm1, empty_state(mm1), 2);
  const auto law = d.norm_law();
  ASSERT_EQ(law.size(), 3u);
  EXPECT_NEAR(law[0], 6.0 / 9, 1e-15);
  EXPECT_NEAR(law[1], 2.0 / 9, 1e-15);
  EXPECT_NEAR(law[2], 1.0 / 9, 1e-15);
  EXPECT_NEAR(phi_exact(mm1, 2), 6.0 / 9 + 2.0 / 9 * std::exp(-1) + 1.0 / 9 * std::exp(-2), 1e-15);
  EXPECT_NEAR(phi_exact(mm1, 2), 0.7635, 5e-5);
}

TEST(Exact, ZeroStepsIsPointMass) {
  const Network lk = fixture_network("lk-prop");
  const auto s = state({{1, 4}, {3}});
  const auto d = exact_step_distribution(lk, s, 0);
  EXPECT_EQ(d.size(), 1u);
  EXPECT_EQ(d.probability(s), 1.0);
  EXPECT_THROW(exact_step_distribution(lk, s, -1), InvalidArgument);
}

TEST(Exact, MassIsConserved) {
  for (auto& name : fixture_names()) {
    const Network net = fixture_network(name);
    const auto d = exact_step_distribution(net, empty_state(net), 8);
    EXPECT_NEAR(d.total(), 1.0, 1e-10) << name;
    for (auto& [s, p] : d.support()) ASSERT_GE(p, 0);
  }
}

TEST(Exact, BudgetAndReductionErrors) {
  const Network lk = fixture_network("lk-prop");
  ExactOptions tiny;
  tiny.state_budget = 10;
  EXPECT_THROW(exact_step_distribution(lk, empty_state(lk), 8, tiny), BudgetExceeded);
  const Network fr = fixture_network("fcfs-reentrant");
  ExactOptions reduced;
  reduced.reduced = true;
  EXPECT_THROW(exact_step_distribution(fr, empty_state(fr), 1, reduced), UnsupportedReduction);
}

TEST(Exact, ReducedModeLumps) {
  for (const char* name : {"lk-sbp", "lk-prop", "tandem2"}) {
    const Network net = fixture_network(name);
    ExactOptions reduced;
    reduced.reduced = true;
    for (auto& start : {empty_state(net), reachable_states(net, empty_state(net), 2).back()}) {
      for (int n = 0; n <= 6; ++n) {
        const auto full = exact_step_distribution(net, start, n);
        const auto lumped = exact_step_distribution(net, start, n, reduced);
        StateDistribution projected;
        for (auto& [s, p] : full.support()) {
          NetworkState c = s;
          canonicalize_in_place(net, c);
          projected.add(c, p);
        }
        ASSERT_LE(lumped.size(), full.size());
        ASSERT_LE(tv_distance(projected, lumped), 1e-10) << name << " n=" << n;
      }
    }
  }
}

TEST(Exact, ReducedModeFasterOnLkSbp) {
  const Network net = fixture_network("lk-sbp");
  ExactOptions reduced;
  reduced.reduced = true;
  const auto full = exact_step_distribution(net, empty_state(net), 10);
  const auto lumped = exact_step_distribution(net, empty_state(net), 10, reduced);
  EXPECT_LT(lumped.size(), full.size());
  EXPECT_NEAR(full.expectation(exp_phi), lumped.expectation(exp_phi), 1e-12);
}

TEST(Transient, ZeroTimeAndIdleNetwork) {
  const Network lk = fixture_network("lk-prop");
  const auto s = state({{1, 4}, {2}});
  const auto r = transient_functional(lk, s, 0.0, exp_phi, 1e-9);
  EXPECT_DOUBLE_EQ(r.value, std::exp(-3.0));
  const Network idle = lk.with_theta({0, 0, 0, 0});
  for (double t : {0.5, 3.0}) {
    const auto q = transient_functional(idle, empty_state(idle), t, exp_phi, 1e-9);
    EXPECT_NEAR(q.value, 1.0, 1e-9);
  }
}

TEST(Transient, Mm1AgainstMatrixExponential) {
  const Network mm1 = fixture_network("mm1");
  for (double t : {0.5, 1.0, 4.0}) {
    const auto r = transient_functional(mm1, empty_state(mm1), t, exp_phi, 1e-6);
    EXPECT_LT(r.error_bound, 1e-6);
    EXPECT_NEAR(r.value, mm1_oracle(1, 2, t, 30), 1e-6) << "t=" << t;
  }
  // a much tighter tolerance still matches the oracle
  const auto tight = transient_functional(mm1, empty_state(mm1), 1.0, exp_phi, 1e-12);
  EXPECT_NEAR(tight.value, mm1_oracle(1, 2, 1.0, 60), 1e-11);
}

TEST(Transient, PruningStaysInsideTolerance) {
  const Network fr = fixture_network("fcfs-reentrant");
  TransientOptions plain;
  const auto ref = transient_functional(fr, empty_state(fr), 0.7, exp_phi, 1e-12, plain);
  TransientOptions pruned;
  pruned.decay = 1;
  pruned.prune_below = 1e-13;
  const auto fast = transient_functional(fr, empty_state(fr), 0.7, exp_phi, 1e-9, pruned);
  EXPECT_LT(fast.error_bound, 1e-9);
  EXPECT_NEAR(fast.value, ref.value, 1e-9);
}

TEST(Transient, Errors) {
  const Network mm1 = fixture_network("mm1");
  EXPECT_THROW(transient_functional(mm1, empty_state(mm1), -1, exp_phi, 1e-6), InvalidArgument);
  EXPECT_THROW(transient_functional(mm1, empty_state(mm1), 1, exp_phi, 0), InvalidArgument);
  TransientOptions heavy;
  heavy.decay = 1;
  heavy.prune_below = 1e-3;
  EXPECT_THROW(transient_functional(mm1, empty_state(mm1), 2, exp_phi, 1e-6, heavy), BudgetExceeded);
}

TEST(Poisson, WeightsAndTail) {
  for (double mu : {0.1, 3.0, 40.0}) {
    auto [w, tail] = poisson_weights(mu, 1e-10);
    double sum = 0;
    for (double x : w) sum += x;
    EXPECT_NEAR(sum + tail, 1.0, 1e-12);
    EXPECT_LT(tail, 1e-10);
    EXPECT_NEAR(w[1], mu * std::exp(-mu), 1e-15);
  }
}

TEST(Monotone, StochasticOrderOfNorm) {
  for (const char* name : {"fcfs-reentrant", "lk-sbp"}) {
    const Network net = fixture_network(name);
    const auto states = all_states(net, 3);
    std::map<NetworkState, std::vector<std::vector<double>>> laws;  // [n] → norm law
    for (auto& s : states) {
      DistributionEngine e(net, s);
      auto& v = laws[s];
      v.push_back(e.current().norm_law());
      for (int n = 1; n <= 8; ++n) {
        e.step();
        v.push_back(e.current().norm_law());
      }
    }
    int pairs = 0;
    for (auto& x : states) {
      if (x.total() > 2) continue;
      for (auto& z : states) {
        if (z.total() != x.total() + 1 || !is_subconfig(x, z)) continue;
        ++pairs;
        for (int n = 0; n <= 8; ++n) {
          const auto cx = cdf(laws[x][n], 12), cz = cdf(laws[z][n], 12);
          for (std::size_t m = 0; m < 12; ++m)
            ASSERT_LE(cz[m], cx[m] + 1e-9) << name << " " << to_string(x) << " vs " << to_string(z) << " n=" << n;
        }
      }
    }
    EXPECT_GT(pairs, 50);
  }
}

TEST(Monotone, JacksonStrongMonotonicity) {
  const Network net = fixture_network("tandem2");
  const auto states = all_states(net, 3);
  const auto counts = [](const NetworkState& s) {
    return std::pair<int, int>(static_cast<int>(s.queues[0].size()), static_cast<int>(s.queues[1].size()));
  };
  std::map<NetworkState, std::vector<StateDistribution>> dists;
  for (auto& s : states) {
    DistributionEngine e(net, s);
    auto& v = dists[s];
    v.push_back(e.current());
    for (int n = 1; n <= 6; ++n) {
      e.step();
      v.push_back(e.current());
    }
  }
  for (auto& x : states)
    for (auto& z : states) {
      const auto [x1, x2] = counts(x);
      const auto [z1, z2] = counts(z);
      if (x1 > z1 || x2 > z2) continue;
      for (auto& y : states) {
        const auto [y1, y2] = counts(y);
        const auto ind = [&](const NetworkState& s) {
          const auto [s1, s2] = counts(s);
          return (s1 >= y1 && s2 >= y2) ? 1.0 : 0.0;
        };
        for (int n = 0; n <= 6; ++n)
          ASSERT_LE(dists[x][n].expectation(ind), dists[z][n].expectation(ind) + 1e-10);
      }
    }
}

TEST(Reachable, DepthAndTv) {
  const Network mm1 = fixture_network("mm1");
  const auto r = reachable_states(mm1, empty_state(mm1), 3);
  EXPECT_EQ(r.size(), 4u);
  const auto a = StateDistribution::point(state({{1}}));
  const auto b = StateDistribution::point(state({{}}));
  EXPECT_DOUBLE_EQ(tv_distance(a, b), 1.0);
  EXPECT_DOUBLE_EQ(tv_distance(a, a), 0.0);
}
