#pragma once

// Markovian coupling of two copies of the embedded chain started from
// ξ ⊆ ζ with ‖ζ‖ = ‖ξ‖ + 1. Both sides share the event stream. The upper side
// is an ordinary embedded chain; the lower side copies each upper move when
// it can and freezes otherwise. The mark b records the class of the single
// extra upper job (0 once the two sides have merged).

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qnet/exact.hpp"

namespace qnet {

enum class CouplingCase { coupled, arrival, other_station, heads_agree, heads_differ };

inline const char* case_name(CouplingCase c) {
  switch (c) {
    case CouplingCase::coupled: return "coupled";
    case CouplingCase::arrival: return "A";
    case CouplingCase::other_station: return "B";
    case CouplingCase::heads_agree: return "C1";
    case CouplingCase::heads_differ: return "C2";
  }
  return "?";
}

struct CoupledState {
  NetworkState lower;
  NetworkState upper;
  ClassId mark = 0;
  int frozen_count = 0;
  int lower_departures = 0;
  int upper_departures = 0;

  friend bool operator==(const CoupledState&, const CoupledState&) = default;
  friend auto operator<=>(const CoupledState&, const CoupledState&) = default;
};

struct CouplingStep {
  StepOutcome outcome;  // the shared event and the upper transition
  CouplingCase label = CouplingCase::coupled;
  bool lower_frozen = false;
};

struct CoupledPath {
  std::vector<CoupledState> states;  // states[0] is the starting pair
  std::vector<CouplingStep> steps;
  /// First index with mark 0; nullopt when the pair did not merge within the run.
  std::optional<int> tau;
};

/// Every station is single-class, or serves one class at a time (head of
/// queue under FCFS or SBP, or preemptive priority).
inline void check_coupling_regime(const Network& net) {
  for (int i = 0; i < net.stations(); ++i) {
    if (net.station_classes(i).size() == 1) continue;
    const auto& pr = net.protocol(i);
    const auto a = pr.allocation.kind();
    const auto q = pr.policy.kind();
    if (a == ServiceAllocation::Kind::preferential) continue;
    if (a == ServiceAllocation::Kind::head_of_queue && q != QueuePolicy::Kind::lcfs) continue;
    throw PreconditionViolation("station " + std::to_string(i + 1) + " uses " + allocation_name(a) +
                                " service under " + policy_name(q) +
                                "; the coupling needs one served class per station");
  }
}

/// The class holding the server at station i, if any.
inline std::optional<ClassId> served_at(const Network& net, const NetworkState& s, int i) {
  const QueueConfig& q = s.queues[i];
  if (q.empty()) return std::nullopt;
  if (net.station_classes(i).size() == 1) return q[0];
  return served_class(net.protocol(i).allocation, q);
}

/// The extra-job class b when `upper` is `lower` plus one job, 0 when equal.
/// Throws NotSubconfiguration otherwise.
inline ClassId extra_job_class(const Network& net, const NetworkState& lower, const NetworkState& upper) {
  if (!is_subconfig(lower, upper)) throw NotSubconfiguration();
  if (lower == upper) return 0;
  const auto a = class_counts(net, lower);
  const auto b = class_counts(net, upper);
  ClassId extra = 0;
  for (ClassId k = 1; k <= net.classes(); ++k) {
    const int diff = b[k] - a[k];
    if (diff == 0) continue;
    if (diff != 1 || extra != 0) throw InvalidArgument("pair differs by more than one job");
    extra = k;
  }
  return extra;
}

/// Applies one shared outcome to a coupled pair.
inline CouplingStep coupled_transition(const Network& net, CoupledState& cs, const StepOutcome& o) {
  CouplingStep step{o, CouplingCase::coupled, false};
  const auto apply_upper = [&] {
    if (!o.transition) return;
    apply_transition_in_place(net, cs.upper, *o.transition);
    if (o.transition->from != 0 && o.transition->to == 0) ++cs.upper_departures;
  };
  const auto apply_lower = [&] {
    if (!o.transition) return;
    apply_transition_in_place(net, cs.lower, *o.transition);
    if (o.transition->from != 0 && o.transition->to == 0) ++cs.lower_departures;
  };

  if (cs.mark == 0) {
    apply_upper();
    apply_lower();
    return step;
  }
  if (o.event.kind == Event::Kind::arrival) {
    step.label = CouplingCase::arrival;
    apply_upper();
    apply_lower();
    return step;
  }
  const int i = o.event.index;
  if (i != net.station_of(cs.mark)) {
    step.label = CouplingCase::other_station;
    apply_upper();
    apply_lower();
    return step;
  }
  if (served_at(net, cs.lower, i) == served_at(net, cs.upper, i)) {
    step.label = CouplingCase::heads_agree;
    apply_upper();
    apply_lower();
    return step;
  }
  step.label = CouplingCase::heads_differ;
  step.lower_frozen = true;
  ++cs.frozen_count;
  apply_upper();
  if (o.transition) cs.mark = o.transition->to;
  return step;
}

inline CoupledState make_coupled_state(const Network& net, const NetworkState& lower, const NetworkState& upper) {
  check_state(net, lower);
  check_state(net, upper);
  return CoupledState{lower, upper, extra_job_class(net, lower, upper), 0, 0, 0};
}

/// One step of the pair; the upper side draws exactly as EmbeddedChain does.
inline CouplingStep coupled_step(const EmbeddedChain& chain, CoupledState& cs, CounterStream& rng) {
  const StepOutcome o = chain.sample(cs.upper, rng);
  return coupled_transition(chain.network(), cs, o);
}

inline CoupledPath run_adjacent_coupling(const Network& net, const NetworkState& lower, const NetworkState& upper,
                                         int steps, CounterStream& rng) {
  check_coupling_regime(net);
  const EmbeddedChain chain(net);
  CoupledPath path;
  CoupledState cs = make_coupled_state(net, lower, upper);
  path.states.reserve(static_cast<std::size_t>(steps) + 1);
  path.steps.reserve(static_cast<std::size_t>(steps));
  path.states.push_back(cs);
  if (cs.mark == 0) path.tau = 0;
  for (int m = 0; m < steps; ++m) {
    path.steps.push_back(coupled_step(chain, cs, rng));
    path.states.push_back(cs);
    if (!path.tau && cs.mark == 0) path.tau = m + 1;
  }
  return path;
}

/// ξ = ξ_0 ⊆ ξ_1 ⊆ ... ⊆ ξ_m = ζ, each one job larger than the previous.
inline std::vector<NetworkState> interpolate(const Network& net, const NetworkState& lower,
                                             const NetworkState& upper) {
  check_state(net, lower);
  check_state(net, upper);
  if (!is_subconfig(lower, upper)) throw NotSubconfiguration();
  // Greedy embedding of each lower buffer into the upper one; unmatched upper
  // positions are the extra jobs, added back one at a time in buffer order.
  std::vector<std::vector<bool>> keep(upper.queues.size());
  std::vector<std::pair<int, std::size_t>> extras;
  for (std::size_t i = 0; i < upper.queues.size(); ++i) {
    const auto& p = lower.queues[i];
    const auto& q = upper.queues[i];
    keep[i].assign(q.size(), false);
    std::size_t a = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (a < p.size() && p[a] == q[j]) {
        keep[i][j] = true;
        ++a;
      } else {
        extras.push_back({static_cast<int>(i), j});
      }
    }
  }
  const auto build = [&] {
    NetworkState s = empty_state(net);
    for (std::size_t i = 0; i < upper.queues.size(); ++i)
      for (std::size_t j = 0; j < upper.queues[i].size(); ++j)
        if (keep[i][j]) s.queues[i].digits().push_back(upper.queues[i][j]);
    return s;
  };
  std::vector<NetworkState> chain{build()};
  for (auto [i, j] : extras) {
    keep[i][j] = true;
    chain.push_back(build());
  }
  return chain;
}

/// Couplings for ξ ⊆ ζ. Pairs more than one job apart are split into the
/// adjacent pairs of interpolate(); each adjacent pair gets its own substream.
inline std::vector<CoupledPath> run_coupling(const Network& net, const NetworkState& lower,
                                             const NetworkState& upper, int steps, const CounterStream& rng) {
  if (steps < 0) throw InvalidArgument("step count must be nonnegative");
  const auto chain = interpolate(net, lower, upper);
  std::vector<CoupledPath> runs;
  if (chain.size() == 1) {
    CounterStream s = rng.substream(0);
    runs.push_back(run_adjacent_coupling(net, lower, upper, steps, s));
    return runs;
  }
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) {
    CounterStream s = rng.substream(j);
    runs.push_back(run_adjacent_coupling(net, chain[j], chain[j + 1], steps, s));
  }
  return runs;
}

struct InvariantReport {
  bool membership = true;     // (lower, upper) stays in Ω_mark
  bool absorption = true;     // once merged, merged forever
  bool delta_relation = true;
  bool monotone_counts = true;
  std::optional<int> first_violation;  // state index of the first failure of any kind
  std::vector<std::string> messages;

  bool ok() const { return membership && absorption && delta_relation && monotone_counts; }
};

/// Ω_b membership of one pair: equal for b = 0, otherwise lower ⊆ upper and
/// the upper composition has exactly one more class-b job.
inline bool in_omega(const CoupledState& cs) {
  if (cs.mark == 0) return cs.lower == cs.upper;
  if (cs.lower == cs.upper || !is_subconfig(cs.lower, cs.upper)) return false;
  std::map<ClassId, int> diff;
  for (auto& q : cs.upper.queues)
    for (ClassId k : q) ++diff[k];
  for (auto& q : cs.lower.queues)
    for (ClassId k : q) --diff[k];
  for (auto& [k, c] : diff)
    if (c != (k == cs.mark ? 1 : 0)) return false;
  return diff.count(cs.mark) == 1;
}

inline InvariantReport verify_coupling_path(const CoupledPath& path) {
  InvariantReport r;
  const auto fail = [&](bool& flag, int m, const std::string& what) {
    if (flag) r.messages.push_back(what + " fails at index " + std::to_string(m));
    flag = false;
    if (!r.first_violation || m < *r.first_violation) r.first_violation = m;
  };
  if (path.states.empty()) return r;
  const bool start_merged = path.states.front().mark == 0;
  std::optional<int> merged_at;
  for (std::size_t m = 0; m < path.states.size(); ++m) {
    const auto& cs = path.states[m];
    const int mi = static_cast<int>(m);
    if (!in_omega(cs)) fail(r.membership, mi, "membership");
    if (cs.mark == 0 && !merged_at) merged_at = mi;
    if (merged_at && (cs.mark != 0 || cs.lower != cs.upper)) fail(r.absorption, mi, "absorption");
    // δ_upper = δ_lower before the merge and δ_lower + 1 from the merge on;
    // a pair that starts merged keeps equal counts.
    const bool after = merged_at.has_value() && !start_merged;
    if (cs.upper_departures != cs.lower_departures + (after ? 1 : 0)) fail(r.delta_relation, mi, "delta relation");
    if (m > 0) {
      const auto& prev = path.states[m - 1];
      if (cs.frozen_count < prev.frozen_count || cs.lower_departures < prev.lower_departures ||
          cs.upper_departures < prev.upper_departures || cs.frozen_count > mi)
        fail(r.monotone_counts, mi, "monotone counts");
    }
  }
  if (path.tau != merged_at) {
    r.membership = false;
    r.messages.push_back("reported coupling time disagrees with the marks");
  }
  return r;
}

/// Frozen steps are exactly the C2 steps, and the lower path with them deleted
/// is a positive-probability path of the lower chain.
inline bool check_frozen_deletion(const Network& net, const CoupledPath& path) {
  const EventAlphabet alphabet(net);
  for (std::size_t m = 0; m < path.steps.size(); ++m) {
    const auto& st = path.steps[m];
    const auto& a = path.states[m];
    const auto& b = path.states[m + 1];
    const bool c2 = st.label == CouplingCase::heads_differ;
    if (st.lower_frozen != c2) return false;
    if (b.frozen_count != a.frozen_count + (c2 ? 1 : 0)) return false;
    if (c2) {
      if (a.lower != b.lower) return false;
      continue;
    }
    if (one_step_law(net, alphabet, a.lower).probability(b.lower) <= 0) return false;
  }
  return true;
}

struct ComparisonReport {
  double tv_upper = 0;  // TV(upper marginal of the pair chain, law of Ξ_n^ζ)
  /// max_m [P(‖Ξ_n^ζ‖ ≤ m) − P(‖Ξ_n^ξ‖ ≤ m)] from the exact single-chain laws;
  /// dominance holds when this is ≤ 0 up to tolerance.
  double cdf_excess = 0;
  /// Same quantity for the pair chain's own marginals (‖lower‖ vs ‖upper‖).
  double pair_cdf_excess = 0;
  std::vector<double> lower_norm_law;
  std::vector<double> upper_norm_law;
  std::size_t pair_states = 0;
};

inline double cdf_excess(const std::vector<double>& upper_law, const std::vector<double>& lower_law) {
  double cu = 0, cl = 0, worst = -1;
  const std::size_t n = std::max(upper_law.size(), lower_law.size());
  for (std::size_t m = 0; m < n; ++m) {
    cu += m < upper_law.size() ? upper_law[m] : 0;
    cl += m < lower_law.size() ? lower_law[m] : 0;
    worst = std::max(worst, cu - cl);
  }
  return n == 0 ? 0 : worst;
}

/// Exact n-step law of the pair chain, compared against the exact single-chain laws.
inline ComparisonReport exact_pair_law_check(const Network& net, const NetworkState& lower,
                                             const NetworkState& upper, int steps,
                                             std::size_t state_budget = 1'000'000) {
  check_coupling_regime(net);
  const EventAlphabet alphabet(net);
  struct Key {
    NetworkState lower, upper;
    ClassId mark;
    auto operator<=>(const Key&) const = default;
  };
  CoupledState start = make_coupled_state(net, lower, upper);
  std::map<Key, double> current{{Key{start.lower, start.upper, start.mark}, 1.0}};
  for (int m = 0; m < steps; ++m) {
    std::map<Key, double> next;
    for (auto& [key, p] : current) {
      for_each_outcome(net, alphabet, key.upper, [&](const StepOutcome& o, double q) {
        CoupledState cs{key.lower, key.upper, key.mark, 0, 0, 0};
        coupled_transition(net, cs, o);
        next[Key{std::move(cs.lower), std::move(cs.upper), cs.mark}] += p * q;
      });
      if (next.size() > state_budget) throw BudgetExceeded("pair chain exceeded the state budget");
    }
    current = std::move(next);
  }
  StateDistribution upper_marginal, lower_marginal;
  for (auto& [key, p] : current) {
    upper_marginal.add(key.upper, p);
    lower_marginal.add(key.lower, p);
  }
  ComparisonReport r;
  r.pair_states = current.size();
  const auto law_upper = exact_step_distribution(net, upper, steps, {state_budget});
  const auto law_lower = exact_step_distribution(net, lower, steps, {state_budget});
  r.tv_upper = tv_distance(upper_marginal, law_upper);
  r.upper_norm_law = law_upper.norm_law();
  r.lower_norm_law = law_lower.norm_law();
  r.cdf_excess = cdf_excess(r.upper_norm_law, r.lower_norm_law);
  r.pair_cdf_excess = cdf_excess(upper_marginal.norm_law(), lower_marginal.norm_law());
  return r;
}

}  // namespace qnet
