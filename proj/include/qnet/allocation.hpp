#pragma once

// Service allocations: how a station splits its capacity between the classes
// present in its buffer.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "qnet/config.hpp"

namespace qnet {

struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  static Fraction reduced(std::int64_t num, std::int64_t den) {
    const std::int64_t g = std::gcd(num, den);
    return g ? Fraction{num / g, den / g} : Fraction{0, 1};
  }
  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Weights W_k(p), only for classes with a strictly positive share, sorted by class.
class AllocationVector {
 public:
  AllocationVector() = default;
  explicit AllocationVector(std::vector<std::pair<ClassId, Fraction>> weights)
      : weights_(std::move(weights)) {}

  double weight(ClassId k) const {
    for (auto& [c, w] : weights_) {
      if (c == k) return w.value();
    }
    return 0.0;
  }
  Fraction exact_weight(ClassId k) const {
    for (auto& [c, w] : weights_) {
      if (c == k) return w;
    }
    return {};
  }
  double total() const {
    double s = 0;
    for (auto& [c, w] : weights_) s += w.value();
    return s;
  }
  bool empty() const { return weights_.empty(); }
  const std::vector<std::pair<ClassId, Fraction>>& entries() const { return weights_; }

  friend bool operator==(const AllocationVector&, const AllocationVector&) = default;

 private:
  std::vector<std::pair<ClassId, Fraction>> weights_;
};

class ServiceAllocation {
 public:
  enum class Kind { head_of_queue, egalitarian, proportional, preferential };

  static ServiceAllocation head_of_queue() { return ServiceAllocation(Kind::head_of_queue, {}); }
  static ServiceAllocation egalitarian() { return ServiceAllocation(Kind::egalitarian, {}); }
  static ServiceAllocation proportional() { return ServiceAllocation(Kind::proportional, {}); }
  static ServiceAllocation preferential(PriorityRanking ranking) {
    if (!ranking.is_total())
      throw InvalidArgument("preferential allocation needs a total priority ranking");
    return ServiceAllocation(Kind::preferential, std::move(ranking));
  }

  Kind kind() const { return kind_; }
  const PriorityRanking& ranking() const { return ranking_; }
  bool order_insensitive() const { return kind_ != Kind::head_of_queue; }
  /// Allocations that serve exactly one class at a time.
  bool indivisible() const { return kind_ == Kind::head_of_queue || kind_ == Kind::preferential; }

  friend bool operator==(const ServiceAllocation&, const ServiceAllocation&) = default;

 private:
  ServiceAllocation(Kind kind, PriorityRanking ranking) : kind_(kind), ranking_(std::move(ranking)) {}
  Kind kind_ = Kind::head_of_queue;
  PriorityRanking ranking_;
};

inline const char* allocation_name(ServiceAllocation::Kind k) {
  switch (k) {
    case ServiceAllocation::Kind::head_of_queue: return "hq";
    case ServiceAllocation::Kind::egalitarian: return "egalitarian";
    case ServiceAllocation::Kind::proportional: return "proportional";
    case ServiceAllocation::Kind::preferential: return "preferential";
  }
  return "?";
}

// Highest-ranked class present in p (preferential service).
inline ClassId top_ranked(const PriorityRanking& r, const QueueConfig& p) {
  ClassId best = p[0];
  int best_caste = r.caste_of(best);
  for (ClassId k : p) {
    const int c = r.caste_of(k);
    if (c < best_caste) {
      best = k;
      best_caste = c;
    }
  }
  return best;
}

/// The class receiving the full capacity under an indivisible allocation, or
/// nothing when the buffer is empty.
inline std::optional<ClassId> served_class(const ServiceAllocation& alloc, const QueueConfig& p) {
  if (p.empty()) return std::nullopt;
  switch (alloc.kind()) {
    case ServiceAllocation::Kind::head_of_queue: return p[0];
    case ServiceAllocation::Kind::preferential: return top_ranked(alloc.ranking(), p);
    default: throw PreconditionViolation("allocation serves several classes at once");
  }
}

inline AllocationVector allocate(const ServiceAllocation& alloc, const QueueConfig& p) {
  if (p.empty()) return {};
  std::vector<std::pair<ClassId, Fraction>> w;
  switch (alloc.kind()) {
    case ServiceAllocation::Kind::head_of_queue:
      w.push_back({p[0], {1, 1}});
      break;
    case ServiceAllocation::Kind::preferential:
      w.push_back({top_ranked(alloc.ranking(), p), {1, 1}});
      break;
    case ServiceAllocation::Kind::egalitarian: {
      const auto x = composition(p);
      const auto n = static_cast<std::int64_t>(x.counts().size());
      for (auto& [k, c] : x.counts()) w.push_back({k, {1, n}});
      break;
    }
    case ServiceAllocation::Kind::proportional: {
      const auto x = composition(p);
      const auto n = static_cast<std::int64_t>(p.size());
      for (auto& [k, c] : x.counts()) w.push_back({k, Fraction::reduced(c, n)});
      break;
    }
  }
  return AllocationVector(std::move(w));
}

/// Calls fn(k, W_k(p)) for every class with a positive share, in double
/// precision and without allocating; `classes` is the station's class set.
template <class Fn>
void for_each_weight(const ServiceAllocation& alloc, const QueueConfig& p,
                     const std::vector<ClassId>& classes, Fn&& fn) {
  if (p.empty()) return;
  switch (alloc.kind()) {
    case ServiceAllocation::Kind::head_of_queue:
      fn(p[0], 1.0);
      return;
    case ServiceAllocation::Kind::preferential:
      fn(top_ranked(alloc.ranking(), p), 1.0);
      return;
    case ServiceAllocation::Kind::egalitarian: {
      int present = 0;
      for (ClassId k : classes)
        if (std::find(p.begin(), p.end(), k) != p.end()) ++present;
      for (ClassId k : classes)
        if (std::find(p.begin(), p.end(), k) != p.end()) fn(k, 1.0 / present);
      return;
    }
    case ServiceAllocation::Kind::proportional: {
      const double n = static_cast<double>(p.size());
      for (ClassId k : classes) {
        const auto c = std::count(p.begin(), p.end(), k);
        if (c > 0) fn(k, static_cast<double>(c) / n);
      }
      return;
    }
  }
}

/// Queue policy plus service allocation of one station.
struct StationProtocol {
  QueuePolicy policy = QueuePolicy::fcfs();
  ServiceAllocation allocation = ServiceAllocation::head_of_queue();

  friend bool operator==(const StationProtocol&, const StationProtocol&) = default;
};

}  // namespace qnet
