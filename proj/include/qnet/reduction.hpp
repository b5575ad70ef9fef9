#pragma once

// Lumped (reduced) station configurations. Three protocol families admit a
// reduction: single-class stations (queue length), order-insensitive
// allocations (composition vector), and head-of-queue service with a static
// buffer priority policy (head plus the per-caste order of the remaining jobs).

#include <algorithm>
#include <variant>
#include <vector>

#include "qnet/allocation.hpp"

namespace qnet {

struct EmptyReduced {
  friend bool operator==(const EmptyReduced&, const EmptyReduced&) = default;
  friend auto operator<=>(const EmptyReduced&, const EmptyReduced&) = default;
};

struct CountReduced {
  int n = 0;
  friend bool operator==(const CountReduced&, const CountReduced&) = default;
  friend auto operator<=>(const CountReduced&, const CountReduced&) = default;
};

struct HeadAndCastes {
  ClassId head = 0;
  std::vector<QueueConfig> castes;  // subsequences of the tail, one per caste
  friend bool operator==(const HeadAndCastes&, const HeadAndCastes&) = default;
  friend auto operator<=>(const HeadAndCastes&, const HeadAndCastes&) = default;
};

using ReducedConfig = std::variant<EmptyReduced, CountReduced, HeadAndCastes, CompositionVector>;

enum class ReductionKind { none, count, composition, head_and_castes };

inline ReductionKind reduction_kind(const StationProtocol& protocol,
                                    const std::vector<ClassId>& station_classes) {
  if (station_classes.size() == 1) return ReductionKind::count;
  if (protocol.allocation.order_insensitive()) return ReductionKind::composition;
  if (protocol.policy.kind() == QueuePolicy::Kind::sbp) return ReductionKind::head_and_castes;
  return ReductionKind::none;
}

inline ReducedConfig reduce(const QueueConfig& p, const StationProtocol& protocol,
                            const std::vector<ClassId>& station_classes) {
  const auto kind = reduction_kind(protocol, station_classes);
  if (kind == ReductionKind::none)
    throw UnsupportedReduction(std::string("no reduction for head-of-queue service under ") +
                               policy_name(protocol.policy.kind()) + " with several classes");
  if (p.empty()) return EmptyReduced{};
  switch (kind) {
    case ReductionKind::count:
      return CountReduced{static_cast<int>(p.size())};
    case ReductionKind::composition:
      return composition(p);
    case ReductionKind::head_and_castes: {
      const auto& r = protocol.policy.ranking();
      HeadAndCastes h{p[0], std::vector<QueueConfig>(r.caste_count())};
      for (std::size_t i = 1; i < p.size(); ++i)
        h.castes[r.caste_of(p[i])].digits().push_back(p[i]);
      return h;
    }
    case ReductionKind::none:
      break;
  }
  return EmptyReduced{};
}

/// A fixed member of p's equivalence class: composition classes are sorted by
/// class id, head-and-castes classes keep the head and order the tail by caste.
/// Stations without a reduction are returned unchanged.
inline void canonicalize_in_place(QueueConfig& p, ReductionKind kind, const StationProtocol& protocol) {
  auto& d = p.digits();
  switch (kind) {
    case ReductionKind::composition:
      std::sort(d.begin(), d.end());
      break;
    case ReductionKind::head_and_castes:
      if (d.size() > 2) {
        const auto& r = protocol.policy.ranking();
        std::stable_sort(d.begin() + 1, d.end(),
                         [&](ClassId a, ClassId b) { return r.caste_of(a) < r.caste_of(b); });
      }
      break;
    case ReductionKind::count:
    case ReductionKind::none:
      break;
  }
}

}  // namespace qnet
