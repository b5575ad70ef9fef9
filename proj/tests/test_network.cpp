#include <gtest/gtest.h>

#include "qnet/fixtures.hpp"
#include "qnet/random.hpp"

using namespace qnet;

namespace {

NetworkSpec single_station(int d) {
  NetworkSpec s;
  s.classes = d;
  s.stations = {{}};
  for (int k = 1; k <= d; ++k) s.stations[0].push_back(k);
  s.theta.assign(d, 0.0);
  s.theta[0] = 1;
  s.beta.assign(d, 1.0);
  s.routing.assign(d, std::vector<double>(d, 0.0));
  s.protocols = {{QueuePolicy::fcfs(), ServiceAllocation::proportional()}};
  return s;
}

// γ by fixed-point iteration γ ← θ + R'γ, independent of the LU solve.
std::vector<double> traffic_by_iteration(const NetworkSpec& s) {
  const int d = s.classes;
  std::vector<double> g = s.theta;
  for (int it = 0; it < 5000; ++it) {
    std::vector<double> n = s.theta;
    for (int l = 0; l < d; ++l)
      for (int k = 0; k < d; ++k) n[l] += s.routing[k][l] * g[k];
    g = n;
  }
  return g;
}

}  // namespace

TEST(Validate, ReentrantLine) {
  for (double th : {0.5, 1.0, 2.0}) {
    const auto spec = builtin_fixture("fcfs-reentrant");
    const Network net = Network(spec).with_theta({th, 0, 0, 0});
    const auto& a = net.analysis();
    for (double g : a.effective_rates) EXPECT_NEAR(g, th, 1e-12);
    EXPECT_NEAR(a.workload[0], th * (1.0 / 4 + 1.0 / 2), 1e-12);
    EXPECT_NEAR(a.workload[1], th * (1.0 / 3 + 1.0 / 5), 1e-12);
    EXPECT_TRUE(a.irreducible);
    EXPECT_TRUE(a.transient);
  }
}

TEST(Validate, Mm1) {
  const Network mm1 = fixture_network("mm1");
  const auto& a = mm1.analysis();
  EXPECT_DOUBLE_EQ(a.effective_rates[0], 1.0);
  EXPECT_DOUBLE_EQ(a.workload[0], 0.5);
  EXPECT_TRUE(a.irreducible);
  EXPECT_EQ(a.vanishing_doublings, 0);
}

TEST(Validate, StochasticCycleIsRejected) {
  auto s = single_station(2);
  s.routing = {{0, 1}, {1, 0}};
  EXPECT_THROW(validate(s), NonTransientRouting);
}

TEST(Validate, StructuralErrors) {
  auto s = single_station(2);
  s.theta = {1};
  EXPECT_THROW(validate(s), DimensionMismatch);
  s = single_station(2);
  s.theta = {-1, 0};
  EXPECT_THROW(validate(s), NegativeRate);
  s = single_station(2);
  s.beta = {1, 0};
  EXPECT_THROW(validate(s), NegativeRate);
  s = single_station(2);
  s.routing = {{0.7, 0.7}, {0, 0}};
  EXPECT_THROW(validate(s), InvalidSpec);
  s = single_station(2);
  s.stations = {{1}};
  EXPECT_THROW(validate(s), InvalidSpec);
  s = single_station(2);
  s.stations = {{1}, {2}};
  EXPECT_THROW(validate(s), DimensionMismatch);  // one protocol for two stations
  s = single_station(2);
  s.protocols = {{QueuePolicy::sbp(PriorityRanking(std::vector<std::vector<ClassId>>{{1}})), ServiceAllocation::head_of_queue()}};
  EXPECT_THROW(validate(s), InvalidSpec);
}

TEST(Validate, ZeroArrivalClassIsNotIrreducible) {
  auto s = single_station(2);
  s.theta = {1, 0};
  EXPECT_FALSE(validate(s).irreducible);
  s.routing = {{0, 0.5}, {0, 0}};
  EXPECT_TRUE(validate(s).irreducible);
}

TEST(Validate, TrafficEquationsOnFixtures) {
  for (auto& name : fixture_names()) {
    const auto spec = builtin_fixture(name);
    const auto a = validate(spec);
    for (int l = 0; l < spec.classes; ++l) {
      double rhs = spec.theta[l];
      for (int k = 0; k < spec.classes; ++k) rhs += spec.routing[k][l] * a.effective_rates[k];
      EXPECT_NEAR(a.effective_rates[l], rhs, 1e-10) << name;
    }
  }
}

TEST(Validate, JacksonWorkload) {
  const Network net = fixture_network("tandem2");
  const auto& a = net.analysis();
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.workload[i], a.effective_rates[i] / net.beta(i + 1), 1e-15);
  EXPECT_NEAR(a.workload[0], 0.5, 1e-12);
  EXPECT_NEAR(a.workload[1], 1.0 / 3, 1e-12);
}

TEST(Validate, RandomTransientRoutingScales) {
  CounterStream rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + static_cast<int>(rng.next() % 5);
    auto s = single_station(d);
    for (int k = 0; k < d; ++k) {
      s.theta[k] = rng.uniform() * 2;
      double budget = 0.95 * rng.uniform();  // row sums stay below 0.95
      for (int l = 0; l < d; ++l) {
        const double r = budget * rng.uniform();
        s.routing[k][l] = r;
        budget -= r;
      }
    }
    const auto base = validate(s);
    const auto oracle = traffic_by_iteration(s);
    for (int k = 0; k < d; ++k) ASSERT_NEAR(base.effective_rates[k], oracle[k], 1e-9);
    const double c = 0.1 + 3 * rng.uniform();
    auto scaled = s;
    for (double& t : scaled.theta) t *= c;
    const auto b = validate(scaled);
    for (int k = 0; k < d; ++k) ASSERT_NEAR(b.effective_rates[k], c * base.effective_rates[k], 1e-9);
    ASSERT_NEAR(b.workload[0], c * base.workload[0], 1e-9);
  }
}

TEST(Fixtures, Shapes) {
  const Network mm1 = fixture_network("mm1");
  EXPECT_EQ(mm1.classes(), 1);
  EXPECT_EQ(mm1.stations(), 1);
  EXPECT_EQ(mm1.protocol(0).policy.kind(), QueuePolicy::Kind::fcfs);
  EXPECT_EQ(mm1.protocol(0).allocation.kind(), ServiceAllocation::Kind::head_of_queue);

  const Network prop = fixture_network("lk-prop");
  EXPECT_EQ(prop.classes(), 4);
  EXPECT_EQ(prop.stations(), 2);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(prop.protocol(i).allocation.kind(), ServiceAllocation::Kind::proportional);
    EXPECT_EQ(prop.reduction(i), ReductionKind::composition);
  }
  EXPECT_EQ(prop.station_of(1), 0);
  EXPECT_EQ(prop.station_of(4), 0);
  EXPECT_EQ(prop.station_of(2), 1);
  EXPECT_DOUBLE_EQ(prop.route(4, 0), 1.0);
  EXPECT_DOUBLE_EQ(prop.route(1, 2), 1.0);

  const Network sbp = fixture_network("lk-sbp");
  EXPECT_EQ(sbp.protocol(0).allocation.kind(), ServiceAllocation::Kind::preferential);
  EXPECT_TRUE(sbp.protocol(0).allocation.ranking().precedes(4, 1));
  EXPECT_TRUE(sbp.protocol(1).allocation.ranking().precedes(2, 3));

  const Network fr = fixture_network("fcfs-reentrant");
  EXPECT_EQ(fr.reduction(0), ReductionKind::none);
}

TEST(Fixtures, Unknown) { EXPECT_THROW(builtin_fixture("bogus"), UnknownFixture); }

TEST(Network, ScaledOnlyTouchesTheta) {
  const Network net = fixture_network("lk-prop");
  const Network s = net.scaled(0.3);
  EXPECT_DOUBLE_EQ(s.theta(1), 0.3);
  EXPECT_EQ(s.spec().beta, net.spec().beta);
  EXPECT_EQ(s.spec().routing, net.spec().routing);
  EXPECT_NEAR(s.analysis().workload[1], 0.3 * net.analysis().workload[1], 1e-12);
}
