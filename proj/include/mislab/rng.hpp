#pragma once

// Counter-keyed random streams.
//
// A stream is identified by (seed, replication). Within a replication each
// consumer takes its own slot: slot 0 selects the proposal indices, slot n+1
// draws X_n. A slot is a SplitMix64 sequence whose starting state is a hash of
// (seed, replication, slot), so the numbers a replication sees do not depend
// on how many replications ran before it or on which thread ran it, and two
// schemes run with the same key draw X_n from identical uniforms.
//
// The generator is fixed: SplitMix64 (Steele, Lea and Flood) with the
// standard increment and finalizer constants; uniforms are the top 53 bits.

#include <cstdint>
#include <limits>

namespace mislab {

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// SplitMix64; satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += detail::kGolden;
    ++draws_;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on {0, ..., n-1}, unbiased by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % n;
  }

  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t state_;
  std::uint64_t draws_ = 0;
};

class RngStream {
 public:
  constexpr RngStream(std::uint64_t seed, std::uint64_t replication)
      : seed_(seed), replication_(replication) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t replication() const { return replication_; }

  /// Independent sequence for one consumer within this replication.
  SplitMix64 slot(std::uint64_t k) const {
    std::uint64_t h = detail::mix64(seed_ + detail::kGolden);
    h = detail::mix64(h ^ (replication_ + 0x632be59bd9b4e019ULL));
    h = detail::mix64(h ^ (k + 0x85157af5ULL));
    return SplitMix64(h);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t replication_;
};

}  // namespace mislab
