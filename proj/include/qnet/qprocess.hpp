#pragma once

// The Q-process: network states, the transition maps f_(k,l) and rates
// h_(k,l), the uniformization constant λ, and the embedded chain with kernel
// Q = I + A/λ sampled through a state-independent event alphabet.

#include <optional>
#include <string>
#include <vector>

#include "qnet/network.hpp"
#include "qnet/random.hpp"

namespace qnet {

/// ξ = [p_1, ..., p_ℵ], one buffer per station.
struct NetworkState {
  std::vector<QueueConfig> queues;

  int total() const {
    int n = 0;
    for (auto& q : queues) n += static_cast<int>(q.size());
    return n;
  }
  bool empty() const {
    for (auto& q : queues)
      if (!q.empty()) return false;
    return true;
  }

  friend bool operator==(const NetworkState&, const NetworkState&) = default;
  friend auto operator<=>(const NetworkState&, const NetworkState&) = default;
};

struct NetworkStateHash {
  std::size_t operator()(const NetworkState& s) const {
    std::size_t h = s.queues.size();
    for (auto& q : s.queues) h = hash_digits(q.digits(), h * 0x9e3779b97f4a7c15ULL);
    return h;
  }
};

inline std::string to_string(const NetworkState& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.queues.size(); ++i) {
    if (i) out += ',';
    out += to_string(s.queues[i]);
  }
  return out + "]";
}

inline NetworkState empty_state(const Network& net) {
  return NetworkState{std::vector<QueueConfig>(static_cast<std::size_t>(net.stations()))};
}

/// Checks station count and that every buffer only holds its station's classes.
inline void check_state(const Network& net, const NetworkState& s) {
  if (static_cast<int>(s.queues.size()) != net.stations())
    throw DimensionMismatch("state has " + std::to_string(s.queues.size()) + " queues, network has " +
                            std::to_string(net.stations()) + " stations");
  for (int i = 0; i < net.stations(); ++i)
    for (ClassId k : s.queues[i])
      if (k < 1 || k > net.classes() || net.station_of(k) != i)
        throw InvalidArgument("class " + std::to_string(k) + " does not belong to station " +
                              std::to_string(i + 1));
}

/// Componentwise subsequence order on network states.
inline bool is_subconfig(const NetworkState& a, const NetworkState& b) {
  if (a.queues.size() != b.queues.size()) return false;
  for (std::size_t i = 0; i < a.queues.size(); ++i)
    if (!is_subconfig(a.queues[i], b.queues[i])) return false;
  return true;
}

/// Number of jobs of each class; index 0 unused.
inline std::vector<int> class_counts(const Network& net, const NetworkState& s) {
  std::vector<int> c(static_cast<std::size_t>(net.classes()) + 1, 0);
  for (auto& q : s.queues)
    for (ClassId k : q) ++c[k];
  return c;
}

/// (from, to) with 0 the external virtual class; (0, 0) is not a transition.
struct TransitionLabel {
  ClassId from = 0;
  ClassId to = 0;

  static TransitionLabel checked(const Network& net, ClassId from, ClassId to) {
    if (from == 0 && to == 0) throw InvalidArgument("(0,0) is not a transition label");
    if (from < 0 || to < 0 || from > net.classes() || to > net.classes())
      throw InvalidArgument("transition label out of range");
    return {from, to};
  }
  friend bool operator==(const TransitionLabel&, const TransitionLabel&) = default;
};

/// λ = ‖θ‖ + Σ_i max_{k∈K_i} β_k.
inline double uniformization_rate(const Network& net) {
  double lambda = 0;
  for (ClassId k = 1; k <= net.classes(); ++k) lambda += net.theta(k);
  for (int i = 0; i < net.stations(); ++i) lambda += net.beta_bar(i);
  return lambda;
}

/// f_(k,l) in place. A departure or class change of a class absent from its
/// buffer leaves the whole state unchanged.
inline void apply_transition_in_place(const Network& net, NetworkState& s, TransitionLabel t) {
  if (t.from != 0) {
    auto& q = s.queues[net.station_of(t.from)];
    if (!remove_first_in_place(q, t.from)) return;
  }
  if (t.to != 0) {
    const int i = net.station_of(t.to);
    insert_in_place(net.protocol(i).policy, s.queues[i], t.to);
  }
}

inline NetworkState apply_transition(const Network& net, NetworkState s, TransitionLabel t) {
  apply_transition_in_place(net, s, t);
  return s;
}

/// h_(0,k) = θ_k and h_(k,l) = W_k β_k R_kl (R_k0 the exit probability).
inline double transition_rate(const Network& net, const NetworkState& s, TransitionLabel t) {
  if (t.from == 0) return net.theta(t.to);
  const int i = net.station_of(t.from);
  const double w = allocate(net.protocol(i).allocation, s.queues[i]).weight(t.from);
  return w * net.beta(t.from) * net.route(t.from, t.to);
}

struct Event {
  enum class Kind { arrival, departure };
  Kind kind = Kind::arrival;
  int index = 0;  // class id for arrivals, 0-based station for departures

  friend bool operator==(const Event&, const Event&) = default;
};

/// The i.i.d. event alphabet: A_k w.p. θ_k/λ and D_i w.p. β̄_i/λ. Arrivals
/// with θ_k = 0 are left out; they carry no mass.
class EventAlphabet {
 public:
  explicit EventAlphabet(const Network& net) : lambda_(uniformization_rate(net)) {
    double acc = 0;
    for (ClassId k = 1; k <= net.classes(); ++k) {
      if (net.theta(k) <= 0) continue;
      events_.push_back({Event::Kind::arrival, k});
      probs_.push_back(net.theta(k) / lambda_);
    }
    for (int i = 0; i < net.stations(); ++i) {
      events_.push_back({Event::Kind::departure, i});
      probs_.push_back(net.beta_bar(i) / lambda_);
    }
    for (double p : probs_) cumulative_.push_back(acc += p);
  }

  double lambda() const { return lambda_; }
  const std::vector<Event>& events() const { return events_; }
  const std::vector<double>& probabilities() const { return probs_; }

  const Event& sample(double u) const {
    for (std::size_t j = 0; j + 1 < events_.size(); ++j)
      if (u < cumulative_[j]) return events_[j];
    return events_.back();
  }

 private:
  double lambda_;
  std::vector<Event> events_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
};

/// What one embedded step did: the event drawn and the transition it fired
/// (nullopt for a self-loop).
struct StepOutcome {
  Event event;
  std::optional<TransitionLabel> transition;
};

/// Enumerates every possible outcome of one embedded step from s with its
/// probability: fn(const StepOutcome&, double). Probabilities use the exact
/// fractional allocation and sum to one.
template <class Fn>
void for_each_outcome(const Network& net, const EventAlphabet& alphabet, const NetworkState& s, Fn&& fn) {
  const double lambda = alphabet.lambda();
  const bool frozen = s.empty();
  for (std::size_t j = 0; j < alphabet.events().size(); ++j) {
    const Event& e = alphabet.events()[j];
    const double pe = alphabet.probabilities()[j];
    if (e.kind == Event::Kind::arrival) {
      fn(StepOutcome{e, TransitionLabel{0, e.index}}, pe);
      continue;
    }
    const int i = e.index;
    const QueueConfig& q = s.queues[i];
    if (frozen || q.empty()) {
      fn(StepOutcome{e, std::nullopt}, pe);
      continue;
    }
    double moved = 0;
    const AllocationVector alloc = allocate(net.protocol(i).allocation, q);
    for (auto& [k, w] : alloc.entries()) {
      for (ClassId l = 0; l <= net.classes(); ++l) {
        const double r = net.route(k, l);
        if (r <= 0) continue;
        // (β̄_i/λ)·(β_k/β̄_i)·W_k·R_kl, with W_k = num/den kept exact until here
        const double p = (static_cast<double>(w.num) * net.beta(k) * r) / (static_cast<double>(w.den) * lambda);
        moved += p;
        fn(StepOutcome{e, TransitionLabel{k, l}}, p);
      }
    }
    const double stay = pe - moved;
    if (stay > 1e-15) fn(StepOutcome{e, std::nullopt}, stay);
  }
}

/// Samples the embedded chain one step at a time.
class EmbeddedChain {
 public:
  explicit EmbeddedChain(const Network& net) : net_(&net), alphabet_(net) {}

  const Network& network() const { return *net_; }
  const EventAlphabet& alphabet() const { return alphabet_; }
  double lambda() const { return alphabet_.lambda(); }

  StepOutcome sample(const NetworkState& s, CounterStream& rng) const {
    const Event& e = alphabet_.sample(rng.uniform());
    if (e.kind == Event::Kind::arrival) return {e, TransitionLabel{0, e.index}};
    const double u = rng.uniform();
    const int i = e.index;
    const QueueConfig& q = s.queues[i];
    if (q.empty()) return {e, std::nullopt};  // also covers the frozen empty network
    const Network& net = *net_;
    const double bar = net.beta_bar(i);
    const ClassId d = net.classes();
    double acc = 0;
    std::optional<TransitionLabel> chosen;
    for_each_weight(net.protocol(i).allocation, q, net.station_classes(i), [&](ClassId k, double w) {
      if (chosen) return;
      const double base = net.beta(k) / bar * w;
      for (ClassId l = 0; l <= d; ++l) {
        const double r = net.route(k, l);
        if (r <= 0) continue;
        acc += base * r;
        if (u < acc) {
          chosen = TransitionLabel{k, l};
          return;
        }
      }
    });
    return {e, chosen};
  }

  void step(NetworkState& s, CounterStream& rng) const {
    const StepOutcome o = sample(s, rng);
    if (o.transition) apply_transition_in_place(*net_, s, *o.transition);
  }

 private:
  const Network* net_;
  EventAlphabet alphabet_;
};

inline NetworkState embedded_step(const Network& net, NetworkState s, CounterStream& rng) {
  EmbeddedChain(net).step(s, rng);
  return s;
}

/// Path Ξ_0 = ξ0, ..., Ξ_n.
inline std::vector<NetworkState> simulate_path(const Network& net, const NetworkState& start, int steps,
                                               CounterStream& rng) {
  check_state(net, start);
  const EmbeddedChain chain(net);
  std::vector<NetworkState> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  path.push_back(start);
  NetworkState s = start;
  for (int m = 0; m < steps; ++m) {
    chain.step(s, rng);
    path.push_back(s);
  }
  return path;
}

}  // namespace qnet
