#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace hierdg {

/// SplitMix64 finalizer (Steele/Lea/Flood mixing constants). Bijective on
/// 64-bit words, which keeps distinct (key, counter) inputs distinct.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= UINT64_C(0xBF58476D1CE4E5B9);
  z ^= z >> 27;
  z *= UINT64_C(0x94D049BB133111EB);
  z ^= z >> 31;
  return z;
}

/// FNV-1a over a byte string, used to derive stream ids from names.
constexpr std::uint64_t hash_name(std::string_view s) {
  std::uint64_t h = UINT64_C(0xCBF29CE484222325);
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= UINT64_C(0x100000001B3);
  }
  return h;
}

/// Counter-based pseudo-random generator with splittable streams.
///
/// The i-th output of a stream is mix64(key + i * GOLDEN), a pure function of
/// (key, counter). Streams are derived from a root seed plus a path of child
/// ids, so per-patient generators can be created independently and in any
/// order while reproducing the serial sequence exactly. Integer-only state,
/// no libm in the core path, same bits on any IEEE-754 platform.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = UINT64_C(0x9E3779B97F4A7C15);

  CounterRng() : key_(0), counter_(0) {}

  explicit CounterRng(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> path = {})
      : key_(mix64(seed + kGolden)), counter_(0) {
    for (std::uint64_t id : path) key_ = derive(key_, id);
  }

  /// Independent child stream. split(a) and split(b) are decorrelated for
  /// a != b, and neither advances this generator.
  CounterRng split(std::uint64_t child_id) const {
    CounterRng r;
    r.key_ = derive(key_, child_id);
    r.counter_ = 0;
    return r;
  }

  CounterRng split(std::string_view name) const { return split(hash_name(name)); }

  std::uint64_t next_u64() { return mix64(key_ + ++counter_ * kGolden); }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [lo, hi], inclusive. Fixed-point scaling keeps the
  /// draw a single next_u64 call so counters stay aligned across platforms.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(next_u64()) * range;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return next_double() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t id) {
    return mix64(key ^ mix64(id + kGolden));
  }

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace hierdg
