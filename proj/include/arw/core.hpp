#pragma once

// Core model state for activated random walk on the cycle Z/nZ.
//
// Sites hold either a number of active particles or a single sleeping
// particle, never both: an active arrival wakes the sleeper in the same
// move.  Randomness comes from an immutable instruction stack: slot (x, j)
// of the stack is a pure function of (seed, x, j), so any two runs over the
// same stack see identical instructions regardless of toppling order.

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arw/rng.hpp"

namespace arw {

using Site = std::int64_t;

struct Params {
  Site n = 0;
  double mu = 0.0;      // initial density, Bernoulli(mu) per site
  double lambda = 0.0;  // sleep rate
  std::uint64_t seed = 1;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const {
    if (n < 2) throw std::invalid_argument("n must be >= 2");
    if (!(mu > 0.0) || mu > 1.0)
      throw std::invalid_argument("mu must lie in (0, 1]");
    if (!(lambda > 0.0) || !(lambda < 1e18))
      throw std::invalid_argument("lambda must be positive and finite");
  }
};

inline Site wrap(Site x, Site n) {
  Site r = x % n;
  return r < 0 ? r + n : r;
}

enum class Instruction : std::uint8_t { JumpLeft, JumpRight, Sleep, Null };

inline const char* name(Instruction i) {
  switch (i) {
    case Instruction::JumpLeft: return "left";
    case Instruction::JumpRight: return "right";
    case Instruction::Sleep: return "sleep";
    case Instruction::Null: return "null";
  }
  return "?";
}

// One site: `active` walkers, plus at most one sleeper when no walker is
// present (sleepy implies active == 0).
struct SiteState {
  std::int32_t active = 0;
  bool sleepy = false;

  std::int64_t mass() const { return active + (sleepy ? 1 : 0); }
  bool operator==(const SiteState&) const = default;
};

class Configuration {
 public:
  Configuration() = default;
  explicit Configuration(Site n) : sites_(static_cast<std::size_t>(n)) {
    if (n < 1) throw std::invalid_argument("Configuration: n must be >= 1");
  }

  static Configuration point_mass(Site n, std::int64_t count, Site at = 0) {
    Configuration c(n);
    for (std::int64_t i = 0; i < count; ++i) c.add_active(at);
    return c;
  }

  Site n() const { return static_cast<Site>(sites_.size()); }
  const SiteState& site(Site x) const { return sites_[idx(x)]; }
  std::int64_t active_at(Site x) const { return sites_[idx(x)].active; }
  bool sleepy_at(Site x) const { return sites_[idx(x)].sleepy; }
  std::int64_t mass_at(Site x) const { return sites_[idx(x)].mass(); }
  std::int64_t particle_total() const { return total_; }

  // Adds one active particle, waking a sleeper if present.
  void add_active(Site x) {
    SiteState& s = sites_[idx(x)];
    if (s.sleepy) {
      s.sleepy = false;
      s.active = 2;  // the sleeper wakes together with the arrival
    } else {
      s.active += 1;
    }
    total_ += 1;
  }

  void remove_active(Site x) {
    SiteState& s = sites_[idx(x)];
    if (s.active < 1) throw std::logic_error("remove_active: no active particle");
    s.active -= 1;
    total_ -= 1;
  }

  // Puts the lone active particle at x to sleep.
  void sleep_at(Site x) {
    SiteState& s = sites_[idx(x)];
    if (s.active != 1 || s.sleepy)
      throw std::logic_error("sleep_at: site must hold exactly one active particle");
    s.active = 0;
    s.sleepy = true;
  }

  std::int64_t active_total() const {
    std::int64_t a = 0;
    for (const SiteState& s : sites_) a += s.active;
    return a;
  }

  std::int64_t sleeper_total() const {
    std::int64_t a = 0;
    for (const SiteState& s : sites_) a += s.sleepy ? 1 : 0;
    return a;
  }

  bool operator==(const Configuration&) const = default;

 private:
  // Hot path: callers almost always pass x already in [0, n).
  std::size_t idx(Site x) const {
    Site m = n();
    return static_cast<std::size_t>(x >= 0 && x < m ? x : wrap(x, m));
  }

  std::vector<SiteState> sites_;
  std::int64_t total_ = 0;
};

// No active particle anywhere: every particle is asleep or absent.
inline bool is_stable(const Configuration& c) { return c.active_total() == 0; }

// Initial Bernoulli(mu) configuration, one coin per site, order-free.
inline Configuration sample_initial(const Params& p) {
  p.validate();
  Configuration c(p.n);
  std::uint64_t key = rng::stream_key(p.seed, rng::Stream::InitialConfig);
  std::uint64_t t = rng::threshold(p.mu);
  for (Site x = 0; x < p.n; ++x) {
    if (rng::word_at(rng::site_key(key, x), 1) < t) c.add_active(x);
  }
  return c;
}

// Masking rewrites selected sleep instructions to null (no-ops).  Used by
// monotonicity checks and by schemes that defer sleeps.
struct SleepMask {
  enum class Kind { None, All, Fraction, Explicit };

  Kind kind = Kind::None;
  double fraction = 0.0;     // for Kind::Fraction
  std::uint64_t seed = 0;    // coin stream for Kind::Fraction
  std::set<std::pair<Site, std::uint64_t>> entries;  // for Kind::Explicit

  static SleepMask none() { return {}; }
  static SleepMask all() { return {Kind::All, 0.0, 0, {}}; }
  static SleepMask some(double fraction, std::uint64_t seed) {
    return {Kind::Fraction, fraction, seed, {}};
  }
  static SleepMask explicit_slots(std::set<std::pair<Site, std::uint64_t>> e) {
    return {Kind::Explicit, 0.0, 0, std::move(e)};
  }
};

// Immutable stack of instructions over sites of Z/nZ.  Slot (x, j), j >= 1,
// decodes a 64-bit word: sleep with probability lambda/(1+lambda), else an
// unbiased jump.  Draws are pure; nothing is consumed here.  Consumption
// bookkeeping lives in Odometer.
class InstructionStack {
 public:
  InstructionStack(std::uint64_t seed, double lambda)
      : seed_(seed),
        lambda_(lambda),
        key_(rng::stream_key(seed, rng::Stream::Instruction)),
        sleep_threshold_(rng::threshold(lambda / (1.0 + lambda))) {
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    std::uint64_t jump_range = ~sleep_threshold_ + 1;  // 2^64 - threshold, mod 2^64
    half_jump_ = sleep_threshold_ + jump_range / 2;    // left/right split point
  }

  std::uint64_t seed() const { return seed_; }
  double lambda() const { return lambda_; }
  const SleepMask& mask() const { return mask_; }
  bool has_mask() const { return mask_.kind != SleepMask::Kind::None; }

  std::uint64_t key_for(Site x) const { return rng::site_key(key_, x); }

  // Decode ignoring any mask.  `skey` must be key_for(x).
  Instruction raw_at_key(std::uint64_t skey, std::uint64_t j) const {
    std::uint64_t u = rng::word_at(skey, j);
    if (u < sleep_threshold_) return Instruction::Sleep;
    return u < half_jump_ ? Instruction::JumpLeft : Instruction::JumpRight;
  }

  Instruction raw_at(Site x, std::uint64_t j) const {
    return raw_at_key(key_for(x), j);
  }

  bool masked(Site x, std::uint64_t j) const {
    switch (mask_.kind) {
      case SleepMask::Kind::None:
        return false;
      case SleepMask::Kind::All:
        return raw_at(x, j) == Instruction::Sleep;
      case SleepMask::Kind::Fraction: {
        if (raw_at(x, j) != Instruction::Sleep) return false;
        std::uint64_t mk = rng::stream_key(mask_.seed, rng::Stream::SleepMask);
        return rng::word_at(rng::site_key(mk, x), j) < rng::threshold(mask_.fraction);
      }
      case SleepMask::Kind::Explicit:
        return mask_.entries.count({x, j}) > 0;
    }
    return false;
  }

  // Masked view: the slot reads Null iff masked.
  Instruction at(Site x, std::uint64_t j) const {
    if (mask_.kind != SleepMask::Kind::None && masked(x, j)) return Instruction::Null;
    return raw_at(x, j);
  }

  Instruction at_key(std::uint64_t skey, Site x, std::uint64_t j) const {
    if (mask_.kind != SleepMask::Kind::None && masked(x, j)) return Instruction::Null;
    return raw_at_key(skey, j);
  }

  InstructionStack with_mask(SleepMask m) const {
    InstructionStack s = *this;
    s.mask_ = std::move(m);
    return s;
  }

 private:
  std::uint64_t seed_;
  double lambda_;
  std::uint64_t key_;
  std::uint64_t sleep_threshold_;
  std::uint64_t half_jump_;
  SleepMask mask_;
};

inline Instruction draw_instruction(const InstructionStack& s, Site x, std::uint64_t j) {
  return s.at(x, j);
}

// Explicit mask entries must point at sleep slots; anything else is a
// malformed mask.  Returns the offending entries (empty means valid).
inline std::vector<std::pair<Site, std::uint64_t>> invalid_mask_entries(
    const InstructionStack& s) {
  std::vector<std::pair<Site, std::uint64_t>> bad;
  if (s.mask().kind != SleepMask::Kind::Explicit) return bad;
  for (const auto& e : s.mask().entries) {
    if (s.raw_at(e.first, e.second) != Instruction::Sleep) bad.push_back(e);
  }
  return bad;
}

// Per-site count of consumed instructions.  h(x) = j means slots 1..j at x
// are spent; the next draw at x reads slot j+1.
class Odometer {
 public:
  Odometer() = default;
  explicit Odometer(Site n) : h_(static_cast<std::size_t>(n), 0) {}

  Site n() const { return static_cast<Site>(h_.size()); }
  std::uint64_t at(Site x) const { return h_[idx(x)]; }
  void increment(Site x) {
    h_[idx(x)] += 1;
    total_ += 1;
  }
  std::uint64_t total() const { return total_; }
  const std::vector<std::uint64_t>& values() const { return h_; }

  bool operator==(const Odometer&) const = default;

 private:
  std::size_t idx(Site x) const {
    Site m = n();
    return static_cast<std::size_t>(x >= 0 && x < m ? x : wrap(x, m));
  }

  std::vector<std::uint64_t> h_;
  std::uint64_t total_ = 0;
};

inline bool pointwise_leq(const Odometer& a, const Odometer& b) {
  if (a.n() != b.n()) return false;
  for (Site x = 0; x < a.n(); ++x)
    if (a.at(x) > b.at(x)) return false;
  return true;
}

struct Effect {
  enum class Kind { Moved, Slept, NoOp, Illegal };
  Kind kind = Kind::NoOp;
  Site dest = -1;  // set for Kind::Moved
};

// Applies one instruction at x.  A sleep succeeds only when the particle is
// alone; otherwise it is wasted.  Null consumes the slot and does nothing.
inline Effect apply_instruction(Configuration& c, Site x, Instruction ins) {
  if (c.active_at(x) < 1) return {Effect::Kind::Illegal, -1};
  switch (ins) {
    case Instruction::JumpLeft:
    case Instruction::JumpRight: {
      Site dest = wrap(x + (ins == Instruction::JumpLeft ? -1 : 1), c.n());
      c.remove_active(x);
      c.add_active(dest);
      return {Effect::Kind::Moved, dest};
    }
    case Instruction::Sleep:
      if (c.mass_at(x) == 1) {
        c.sleep_at(x);
        return {Effect::Kind::Slept, -1};
      }
      return {Effect::Kind::NoOp, -1};
    case Instruction::Null:
      return {Effect::Kind::NoOp, -1};
  }
  return {Effect::Kind::NoOp, -1};
}

}  // namespace arw
