#pragma once

// Built-in networks used by tests, the acceptance suite and the CLI.
//
//   mm1             single M/M/1 queue, θ = 1, β = 2
//   tandem2         two single-class stations in series, θ = (1, 0), β = (2, 3)
//   lk-prop         two-station reentrant line 1→2→3→4, K1 = {1,4}, K2 = {2,3},
//                   proportional allocation at both stations, β = (4, 3, 5, 2)
//   lk-sbp          same line under preemptive priority (4 over 1, 2 over 3) with
//                   β = (10, 1.5, 10, 1.5): each station is subcritical at θ = 1
//                   while the load of classes 2 and 4 together is 4/3
//   fcfs-reentrant  same line as lk-prop under FCFS head-of-queue service

#include <string>
#include <vector>

#include "qnet/network.hpp"

namespace qnet {

inline const std::vector<std::string>& fixture_names() {
  static const std::vector<std::string> names{"mm1", "tandem2", "lk-prop", "lk-sbp", "fcfs-reentrant"};
  return names;
}

namespace detail {

inline NetworkSpec reentrant_line(std::string name, std::vector<double> beta,
                                  StationProtocol s1, StationProtocol s2) {
  NetworkSpec s;
  s.name = std::move(name);
  s.classes = 4;
  s.stations = {{1, 4}, {2, 3}};
  s.theta = {1, 0, 0, 0};
  s.beta = std::move(beta);
  s.routing = {{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {0, 0, 0, 0}};
  s.protocols = {std::move(s1), std::move(s2)};
  return s;
}

}  // namespace detail

inline NetworkSpec builtin_fixture(const std::string& name) {
  const StationProtocol fcfs_hq{QueuePolicy::fcfs(), ServiceAllocation::head_of_queue()};
  if (name == "mm1") {
    NetworkSpec s;
    s.name = name;
    s.classes = 1;
    s.stations = {{1}};
    s.theta = {1};
    s.beta = {2};
    s.routing = {{0}};
    s.protocols = {fcfs_hq};
    return s;
  }
  if (name == "tandem2") {
    NetworkSpec s;
    s.name = name;
    s.classes = 2;
    s.stations = {{1}, {2}};
    s.theta = {1, 0};
    s.beta = {2, 3};
    s.routing = {{0, 1}, {0, 0}};
    s.protocols = {fcfs_hq, fcfs_hq};
    return s;
  }
  if (name == "lk-prop") {
    const StationProtocol ps{QueuePolicy::fcfs(), ServiceAllocation::proportional()};
    return detail::reentrant_line(name, {4, 3, 5, 2}, ps, ps);
  }
  if (name == "lk-sbp") {
    return detail::reentrant_line(
        name, {10, 1.5, 10, 1.5},
        {QueuePolicy::fcfs(), ServiceAllocation::preferential(PriorityRanking::total({4, 1}))},
        {QueuePolicy::fcfs(), ServiceAllocation::preferential(PriorityRanking::total({2, 3}))});
  }
  if (name == "fcfs-reentrant") {
    return detail::reentrant_line(name, {4, 3, 5, 2}, fcfs_hq, fcfs_hq);
  }
  throw UnknownFixture(name);
}

inline Network fixture_network(const std::string& name) { return Network(builtin_fixture(name)); }

}  // namespace qnet
