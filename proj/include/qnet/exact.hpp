#pragma once

// Exact finite-horizon laws of the embedded chain. Each step adds at most one
// job, so the n-step reachable set is finite and can be expanded breadth first
// with the probability of every distinct state aggregated.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qnet/qprocess.hpp"

namespace qnet {

class StateDistribution {
 public:
  using Map = std::unordered_map<NetworkState, double, NetworkStateHash>;

  StateDistribution() = default;
  static StateDistribution point(NetworkState s) {
    StateDistribution d;
    d.mass_.emplace(std::move(s), 1.0);
    return d;
  }

  void add(const NetworkState& s, double p) { mass_[s] += p; }
  void add(NetworkState&& s, double p) { mass_[std::move(s)] += p; }

  double probability(const NetworkState& s) const {
    auto it = mass_.find(s);
    return it == mass_.end() ? 0.0 : it->second;
  }
  std::size_t size() const { return mass_.size(); }
  const Map& support() const { return mass_; }
  Map& support() { return mass_; }

  double total() const {
    double t = 0;
    for (auto& [s, p] : mass_) t += p;
    return t;
  }

  template <class Fn>
  double expectation(Fn&& fn) const {
    double e = 0;
    for (auto& [s, p] : mass_) e += p * fn(s);
    return e;
  }

  /// P(‖Ξ‖ = m) for m = 0..max.
  std::vector<double> norm_law() const {
    std::vector<double> law;
    for (auto& [s, p] : mass_) {
      const auto m = static_cast<std::size_t>(s.total());
      if (law.size() <= m) law.resize(m + 1, 0.0);
      law[m] += p;
    }
    return law;
  }

  /// Support in a fixed order, for output and comparisons.
  std::vector<std::pair<NetworkState, double>> sorted() const {
    std::vector<std::pair<NetworkState, double>> v(mass_.begin(), mass_.end());
    std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
    return v;
  }

 private:
  Map mass_;
};

struct ExactOptions {
  std::size_t state_budget = 1'000'000;
  /// Lump states into canonical representatives of their reduced configuration.
  bool reduced = false;
  /// States whose mass falls below this after a step are dropped; the dropped
  /// mass is accounted for in pruned_mass().
  double prune_below = 0.0;
};

inline void canonicalize_in_place(const Network& net, NetworkState& s) {
  for (int i = 0; i < net.stations(); ++i)
    canonicalize_in_place(s.queues[i], net.reduction(i), net.protocol(i));
}

/// Exact one-step law from s (the row of Q at s).
inline StateDistribution one_step_law(const Network& net, const EventAlphabet& alphabet, const NetworkState& s) {
  StateDistribution next;
  for_each_outcome(net, alphabet, s, [&](const StepOutcome& o, double p) {
    if (!o.transition) {
      next.add(s, p);
      return;
    }
    next.add(apply_transition(net, s, *o.transition), p);
  });
  return next;
}

/// Advances a state distribution one kernel application at a time.
class DistributionEngine {
 public:
  DistributionEngine(const Network& net, const NetworkState& start, ExactOptions options = {})
      : net_(&net), alphabet_(net), options_(options) {
    check_state(net, start);
    if (options_.reduced) {
      for (int i = 0; i < net.stations(); ++i)
        if (net.reduction(i) == ReductionKind::none)
          throw UnsupportedReduction("station " + std::to_string(i + 1) + " has no reduced representation");
    }
    NetworkState s = start;
    if (options_.reduced) canonicalize_in_place(net, s);
    current_ = StateDistribution::point(std::move(s));
  }

  const StateDistribution& current() const { return current_; }
  StateDistribution& mutable_current() { return current_; }
  int steps() const { return steps_; }
  double pruned_mass() const { return pruned_; }

  void step() {
    StateDistribution next;
    next.support().reserve(current_.size() * 2);
    const Network& net = *net_;
    for (auto& [s, p] : current_.support()) {
      for_each_outcome(net, alphabet_, s, [&](const StepOutcome& o, double q) {
        if (!o.transition) {
          next.add(s, p * q);
          return;
        }
        NetworkState t = apply_transition(net, s, *o.transition);
        if (options_.reduced) canonicalize_in_place(net, t);
        next.add(std::move(t), p * q);
      });
      if (next.size() > options_.state_budget)
        throw BudgetExceeded("exact engine exceeded the budget of " + std::to_string(options_.state_budget) +
                             " states at step " + std::to_string(steps_ + 1));
    }
    if (options_.prune_below > 0) {
      auto& m = next.support();
      for (auto it = m.begin(); it != m.end();) {
        if (it->second < options_.prune_below) {
          pruned_ += it->second;
          it = m.erase(it);
        } else {
          ++it;
        }
      }
    }
    current_ = std::move(next);
    ++steps_;
  }

  void advance(int n) {
    for (int m = 0; m < n; ++m) step();
  }

 private:
  const Network* net_;
  EventAlphabet alphabet_;
  ExactOptions options_;
  StateDistribution current_;
  int steps_ = 0;
  double pruned_ = 0;
};

inline StateDistribution exact_step_distribution(const Network& net, const NetworkState& start, int steps,
                                                 ExactOptions options = {}) {
  if (steps < 0) throw InvalidArgument("step count must be nonnegative");
  DistributionEngine engine(net, start, options);
  engine.advance(steps);
  return engine.current();
}

/// exp(−α‖ξ‖).
inline double exp_norm(const NetworkState& s, double alpha = 1.0) { return std::exp(-alpha * s.total()); }

struct TransientResult {
  double value = 0;
  /// Poisson tail beyond the last term plus the bound on what pruning removed.
  double error_bound = 0;
  int terms = 0;
};

/// Poisson(μ) probabilities for n = 0..M where M is the first index whose
/// remaining tail is below `tail_tol`; the tail is returned alongside.
inline std::pair<std::vector<double>, double> poisson_weights(double mu, double tail_tol) {
  std::vector<double> w;
  if (mu == 0) return {{1.0}, 0.0};
  const double log_mu = std::log(mu);
  // Generate well past the mode so the suffix sums below are accurate.
  for (int n = 0;; ++n) {
    const double lw = -mu + n * log_mu - std::lgamma(n + 1.0);
    w.push_back(std::exp(lw));
    if (n > mu && lw < -745) break;
  }
  std::vector<double> suffix(w.size() + 1, 0.0);
  for (std::size_t n = w.size(); n-- > 0;) suffix[n] = suffix[n + 1] + w[n];
  std::size_t m = 0;
  while (suffix[m + 1] >= tail_tol) ++m;
  const double tail = suffix[m + 1];
  w.resize(m + 1);
  return {w, tail};
}

struct TransientOptions {
  ExactOptions exact;
  /// Known decay of the functional: φ(ξ) ≤ exp(−decay·‖ξ‖). Zero means only φ ≤ 1 is used.
  double decay = 0;
  /// A state is dropped after step n when its mass times the largest amount it
  /// could still add to the sum falls below this. Zero disables pruning.
  double prune_below = 0;
};

/// E φ(X_t) for the continuous-time process started at ξ0, through
/// uniformization: e^{−λt} Σ_n (λt)^n/n! E φ(Ξ_n). Requires 0 ≤ φ ≤ 1.
///
/// Pruning is sound because the norm drops by at most one per step: a state
/// of norm N dropped after step n changes term m ≥ n by at most its mass times
/// exp(−decay·max(0, N − (m − n))).
inline TransientResult transient_functional(const Network& net, const NetworkState& start, double t,
                                            const std::function<double(const NetworkState&)>& phi, double tol,
                                            TransientOptions options = {}) {
  if (t < 0) throw InvalidArgument("time must be nonnegative");
  if (!(tol > 0)) throw InvalidArgument("tolerance must be positive");
  if (options.decay < 0) throw InvalidArgument("decay must be nonnegative");
  const double lambda = uniformization_rate(net);
  auto [weights, tail] = poisson_weights(lambda * t, tol / 2);
  const std::size_t terms = weights.size();
  DistributionEngine engine(net, start, options.exact);
  TransientResult r;
  double pruned_bound = 0;
  // reach[n][N]: largest weight a state of norm N held after step n can still carry.
  const auto reach = [&](std::size_t n, int norm) {
    double b = 0;
    for (std::size_t m = n + 1; m < terms; ++m)
      b += weights[m] * std::exp(-options.decay * std::max<double>(0, norm - static_cast<double>(m - n)));
    return b;
  };
  std::vector<std::vector<double>> reach_cache(terms);
  for (std::size_t n = 0; n < terms; ++n) {
    if (n > 0) {
      engine.step();
      if (options.prune_below > 0) {
        auto& cache = reach_cache[n];
        auto& m = engine.mutable_current().support();
        for (auto it = m.begin(); it != m.end();) {
          const auto norm = static_cast<std::size_t>(it->first.total());
          while (cache.size() <= norm) cache.push_back(reach(n, static_cast<int>(cache.size())));
          const double bound = it->second * cache[norm];
          if (bound < options.prune_below) {
            // The state still contributes to term n itself before it goes.
            r.value += weights[n] * it->second * phi(it->first);
            pruned_bound += bound;
            it = m.erase(it);
          } else {
            ++it;
          }
        }
      }
    }
    r.value += weights[n] * engine.current().expectation(phi);
  }
  r.terms = static_cast<int>(terms);
  r.error_bound = tail + pruned_bound + engine.pruned_mass();
  if (r.error_bound >= tol)
    throw BudgetExceeded("pruning leaves an error bound of " + std::to_string(r.error_bound) +
                         ", above the requested tolerance");
  return r;
}

/// Σ_ξ P(Ξ_n = ξ) exp(−α‖ξ‖) from the empty network.
inline double phi_exact(const Network& net, int steps, double alpha = 1.0, ExactOptions options = {}) {
  return exact_step_distribution(net, empty_state(net), steps, options)
      .expectation([&](const NetworkState& s) { return exp_norm(s, alpha); });
}

/// Every state reachable from `start` within `depth` steps (positive-mass moves only).
inline std::vector<NetworkState> reachable_states(const Network& net, const NetworkState& start, int depth) {
  const EventAlphabet alphabet(net);
  std::map<NetworkState, int> seen{{start, 0}};
  std::vector<NetworkState> frontier{start};
  for (int m = 0; m < depth; ++m) {
    std::vector<NetworkState> next;
    for (auto& s : frontier) {
      for_each_outcome(net, alphabet, s, [&](const StepOutcome& o, double p) {
        if (!o.transition || p <= 0) return;
        NetworkState t = apply_transition(net, s, *o.transition);
        if (seen.emplace(t, m + 1).second) next.push_back(std::move(t));
      });
    }
    frontier = std::move(next);
  }
  std::vector<NetworkState> out;
  out.reserve(seen.size());
  for (auto& [s, d] : seen) out.push_back(s);
  return out;
}

/// Total-variation distance between two laws.
inline double tv_distance(const StateDistribution& a, const StateDistribution& b) {
  double d = 0;
  for (auto& [s, p] : a.support()) d += std::abs(p - b.probability(s));
  for (auto& [s, q] : b.support())
    if (a.support().find(s) == a.support().end()) d += q;
  return d / 2;
}

}  // namespace qnet
