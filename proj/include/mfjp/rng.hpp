#pragma once

#include <cmath>
#include <cstdint>

namespace mfjp {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based generator. The stream key is a hash of (seed, replica, stage);
/// draw k of a stream is splitmix64(key + k * golden), so a replica's numbers
/// depend only on its own key and counter, never on scheduling.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t replica, std::uint64_t stage = 0) noexcept
      : key_(splitmix64(splitmix64(splitmix64(seed) ^ replica) ^ (stage * 0xd1b54a32d192ed03ULL))) {}

  std::uint64_t next() noexcept {
    return splitmix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform on (0, 1].
  double uniform() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  double exponential() noexcept { return -std::log(uniform()); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mfjp
