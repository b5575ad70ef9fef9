#pragma once

// Spaces of multi-class configurations: ordered buffers of class ids, their
// composition vectors, queue policies (insertion operators), deletion, and the
// subsequence order used by every monotonicity statement.

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "qnet/error.hpp"

namespace qnet {

// 1-based class identifier; 0 is only used as the virtual external class in
// transition labels.
using ClassId = int;

/// One station's buffer: the order of the digits is the service order.
class QueueConfig {
 public:
  QueueConfig() = default;
  QueueConfig(std::initializer_list<ClassId> digits) : digits_(digits) {}
  explicit QueueConfig(std::vector<ClassId> digits) : digits_(std::move(digits)) {}

  std::size_t size() const { return digits_.size(); }
  bool empty() const { return digits_.empty(); }
  ClassId operator[](std::size_t i) const { return digits_[i]; }
  auto begin() const { return digits_.begin(); }
  auto end() const { return digits_.end(); }
  const std::vector<ClassId>& digits() const { return digits_; }
  std::vector<ClassId>& digits() { return digits_; }

  friend bool operator==(const QueueConfig&, const QueueConfig&) = default;
  friend auto operator<=>(const QueueConfig&, const QueueConfig&) = default;

 private:
  std::vector<ClassId> digits_;
};

inline std::size_t hash_digits(const std::vector<ClassId>& digits, std::size_t seed = 0) {
  // FNV-style mixing; configurations are short, so a simple running hash suffices.
  std::size_t h = seed ^ 0xcbf29ce484222325ULL;
  for (ClassId k : digits) {
    h ^= static_cast<std::size_t>(k) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  h ^= digits.size() * 0x100000001b3ULL;
  return h;
}

struct QueueConfigHash {
  std::size_t operator()(const QueueConfig& p) const { return hash_digits(p.digits()); }
};

inline std::string to_string(const QueueConfig& p) {
  std::string s = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(p[i]);
  }
  return s + ")";
}

/// Number of digits of each class present in a configuration.
class CompositionVector {
 public:
  CompositionVector() = default;
  CompositionVector(std::initializer_list<std::pair<const ClassId, int>> counts) {
    for (auto [k, n] : counts) {
      if (n > 0) counts_[k] = n;
    }
  }

  int count(ClassId k) const {
    auto it = counts_.find(k);
    return it == counts_.end() ? 0 : it->second;
  }
  int norm() const {
    int n = 0;
    for (auto& [k, c] : counts_) n += c;
    return n;
  }
  std::vector<ClassId> support() const {
    std::vector<ClassId> s;
    for (auto& [k, c] : counts_) s.push_back(k);
    return s;
  }
  void add(ClassId k, int n = 1) {
    int& c = counts_[k];
    c += n;
    if (c == 0) counts_.erase(k);
  }
  const std::map<ClassId, int>& counts() const { return counts_; }

  friend bool operator==(const CompositionVector&, const CompositionVector&) = default;
  friend auto operator<=>(const CompositionVector&, const CompositionVector&) = default;

 private:
  std::map<ClassId, int> counts_;  // only strictly positive entries are stored
};

inline CompositionVector composition(const QueueConfig& p) {
  CompositionVector x;
  for (ClassId k : p) x.add(k);
  return x;
}

inline ClassId head(const QueueConfig& p) {
  if (p.empty()) throw EmptyConfiguration();
  return p[0];
}

/// Ordered partition of a station's classes into castes; castes()[0] has the
/// highest priority. precedes(k, l) is the strict order k ≺ l (k outranks l).
class PriorityRanking {
 public:
  PriorityRanking() = default;
  explicit PriorityRanking(std::vector<std::vector<ClassId>> castes) : castes_(std::move(castes)) {
    std::set<ClassId> seen;
    for (std::size_t c = 0; c < castes_.size(); ++c) {
      if (castes_[c].empty()) throw InvalidArgument("priority ranking has an empty caste");
      for (ClassId k : castes_[c]) {
        if (k < 1) throw InvalidArgument("priority ranking contains a non-positive class id");
        if (!seen.insert(k).second) throw InvalidArgument("priority ranking castes are not disjoint");
        if (static_cast<std::size_t>(k) >= caste_of_.size()) caste_of_.resize(k + 1, -1);
        caste_of_[k] = static_cast<int>(c);
      }
    }
  }

  /// Total ranking from a list of classes, highest priority first.
  static PriorityRanking total(const std::vector<ClassId>& order) {
    std::vector<std::vector<ClassId>> castes;
    for (ClassId k : order) castes.push_back({k});
    return PriorityRanking(std::move(castes));
  }

  const std::vector<std::vector<ClassId>>& castes() const { return castes_; }
  std::size_t caste_count() const { return castes_.size(); }

  bool contains(ClassId k) const {
    return k >= 0 && static_cast<std::size_t>(k) < caste_of_.size() && caste_of_[k] >= 0;
  }
  int caste_of(ClassId k) const {
    if (!contains(k)) throw InvalidArgument("class " + std::to_string(k) + " is not ranked");
    return caste_of_[k];
  }
  bool precedes(ClassId k, ClassId l) const { return caste_of(k) < caste_of(l); }

  bool is_total() const {
    return std::all_of(castes_.begin(), castes_.end(), [](auto& c) { return c.size() == 1; });
  }

  /// True iff the castes partition exactly the given class set.
  bool partitions(const std::vector<ClassId>& classes) const {
    std::set<ClassId> want(classes.begin(), classes.end());
    std::set<ClassId> have;
    for (auto& c : castes_) have.insert(c.begin(), c.end());
    return want == have;
  }

  friend bool operator==(const PriorityRanking& a, const PriorityRanking& b) {
    return a.castes_ == b.castes_;
  }

 private:
  std::vector<std::vector<ClassId>> castes_;
  std::vector<int> caste_of_;
};

class QueuePolicy {
 public:
  enum class Kind { fcfs, lcfs, sbp };

  static QueuePolicy fcfs() { return QueuePolicy(Kind::fcfs, {}); }
  static QueuePolicy lcfs() { return QueuePolicy(Kind::lcfs, {}); }
  static QueuePolicy sbp(PriorityRanking ranking) { return QueuePolicy(Kind::sbp, std::move(ranking)); }

  Kind kind() const { return kind_; }
  const PriorityRanking& ranking() const { return ranking_; }

  friend bool operator==(const QueuePolicy&, const QueuePolicy&) = default;

 private:
  QueuePolicy(Kind kind, PriorityRanking ranking) : kind_(kind), ranking_(std::move(ranking)) {}
  Kind kind_ = Kind::fcfs;
  PriorityRanking ranking_;
};

inline const char* policy_name(QueuePolicy::Kind k) {
  switch (k) {
    case QueuePolicy::Kind::fcfs: return "fcfs";
    case QueuePolicy::Kind::lcfs: return "lcfs";
    case QueuePolicy::Kind::sbp: return "sbp";
  }
  return "?";
}

/// 1-based position the inserted k-digit occupies in I_k(p). For SBP the new
/// digit is placed in front of the longest suffix of (k_2, ..., k_n) made only
/// of classes that k outranks, so it never overtakes a job it does not dominate.
inline std::size_t insertion_index(const QueuePolicy& policy, const QueueConfig& p, ClassId k) {
  const std::size_t n = p.size();
  if (n == 0) return 1;
  switch (policy.kind()) {
    case QueuePolicy::Kind::fcfs:
      return n + 1;
    case QueuePolicy::Kind::lcfs:
      return 2;
    case QueuePolicy::Kind::sbp: {
      const auto& r = policy.ranking();
      std::size_t suffix = 0;
      while (suffix + 1 < n && r.precedes(k, p[n - 1 - suffix])) ++suffix;
      return n + 1 - suffix;
    }
  }
  return n + 1;
}

inline void insert_in_place(const QueuePolicy& policy, QueueConfig& p, ClassId k) {
  const std::size_t j = insertion_index(policy, p, k);
  auto& d = p.digits();
  d.insert(d.begin() + static_cast<std::ptrdiff_t>(j - 1), k);
}

inline QueueConfig insert(const QueuePolicy& policy, QueueConfig p, ClassId k) {
  insert_in_place(policy, p, k);
  return p;
}

/// Removes the first k-digit; returns false (leaving p untouched) if none.
inline bool remove_first_in_place(QueueConfig& p, ClassId k) {
  auto& d = p.digits();
  auto it = std::find(d.begin(), d.end(), k);
  if (it == d.end()) return false;
  d.erase(it);
  return true;
}

/// D_k: removes the first k-digit, identity if k is absent.
inline QueueConfig remove_first(QueueConfig p, ClassId k) {
  remove_first_in_place(p, k);
  return p;
}

/// p ⊆ q: the digits of p appear among those of q in the same order.
inline bool is_subconfig(const QueueConfig& p, const QueueConfig& q) {
  std::size_t i = 0;
  for (std::size_t j = 0; j < q.size() && i < p.size(); ++j) {
    if (p[i] == q[j]) ++i;
  }
  return i == p.size();
}

/// True when the digits behind the head are ordered by caste (higher castes
/// first). Every configuration reachable from ∅ under SBP insertion has this form.
inline bool tail_is_caste_sorted(const QueueConfig& p, const PriorityRanking& r) {
  for (std::size_t i = 2; i < p.size(); ++i) {
    if (r.caste_of(p[i]) < r.caste_of(p[i - 1])) return false;
  }
  return true;
}

}  // namespace qnet
