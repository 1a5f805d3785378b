#pragma once

// Counter-based deterministic randomness.  Every random quantity in the
// project is a pure function of (master seed, stream tag, coordinates),
// so draws can be evaluated in any order, repeated, or distributed across
// threads without changing results.

#include <cmath>
#include <cstdint>

namespace arw::rng {

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

// Stream tags keep unrelated draw families independent under one master seed.
enum class Stream : std::uint64_t {
  Instruction = 0xA11CE001,
  InitialConfig = 0xA11CE002,
  Policy = 0xA11CE003,
  SleepMask = 0xA11CE004,
  TrialSeed = 0xA11CE005,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, Stream s) noexcept {
  return mix64(seed ^ (static_cast<std::uint64_t>(s) * kGamma));
}

constexpr std::uint64_t site_key(std::uint64_t key, std::int64_t x) noexcept {
  return mix64(key ^ (static_cast<std::uint64_t>(x) * kGamma));
}

// j-th word of the stream attached to a site key.
constexpr std::uint64_t word_at(std::uint64_t skey, std::uint64_t j) noexcept {
  return mix64(skey + j * kGamma);
}

// Largest threshold t such that P(u < t) = p for u uniform on 64-bit words,
// up to one part in 2^64.
inline std::uint64_t threshold(double p) noexcept {
  if (p <= 0.0) return 0;
  if (p >= 1.0) return ~0ULL;
  long double scaled = std::ldexp(static_cast<long double>(p), 64);
  if (scaled >= std::ldexp(1.0L, 64)) return ~0ULL;
  if (scaled <= 0.0L) return 0;
  return static_cast<std::uint64_t>(scaled);
}

// Uniform double in [0,1) from a word; 53-bit resolution.
constexpr double to_unit(std::uint64_t u) noexcept {
  return static_cast<double>(u >> 11) * 0x1.0p-53;
}

// Small sequential generator for policy decisions, where a private mutable
// stream is fine.  Seeded from a stream key; same mixing as above.
class Sequential {
 public:
  explicit Sequential(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += kGamma;
    return mix64(state_);
  }

  // Unbiased-enough bounded draw (Lemire multiply-shift; bias < 2^-64 * n).
  std::uint64_t below(std::uint64_t n) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace arw::rng
