#pragma once

#include <cstdint>
#include <limits>

namespace qnet {

/// Counter-based random stream: the i-th draw is a pure function of
/// (key, i), so replication r of a run always sees the same numbers no matter
/// which thread runs it or in which order. Keys come from (master seed, index).
class CounterStream {
 public:
  using result_type = std::uint64_t;

  explicit CounterStream(std::uint64_t seed, std::uint64_t index = 0)
      : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) + (index + 1) * 0xd1b54a32d192ed03ULL)) {}

  /// Independent child stream; substream(i) of the same parent is reproducible.
  CounterStream substream(std::uint64_t index) const { return CounterStream(key_, index); }

  std::uint64_t next() { return mix(key_ + (++counter_) * kGamma); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t draws() const { return counter_; }

  result_type operator()() { return next(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace qnet
