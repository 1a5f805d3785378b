#pragma once

// Toppling engine: runs the site-indexed dynamics over an instruction stack
// under a selection policy.  By the abelian property the final configuration,
// odometer, and instruction count do not depend on the policy; policies exist
// for performance and for exercising that invariance in tests.

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "arw/core.hpp"
#include "arw/rng.hpp"

namespace arw {

inline constexpr std::uint64_t kDefaultBudget = 1'000'000'000ULL;

struct IllegalTopple : std::logic_error {
  explicit IllegalTopple(Site x)
      : std::logic_error("topple at site " + std::to_string(x) +
                         " with no active particle") {}
};

struct Policy {
  enum class Kind { Leftmost, Random, Sweep };

  Kind kind = Kind::Random;
  std::uint64_t seed = 0;  // selection stream for Kind::Random
  std::optional<std::vector<Site>> allowed;  // restriction; nullopt = all sites

  static Policy leftmost() { return {Kind::Leftmost, 0, std::nullopt}; }
  static Policy random(std::uint64_t seed = 0) { return {Kind::Random, seed, std::nullopt}; }
  static Policy sweep() { return {Kind::Sweep, 0, std::nullopt}; }
};

inline Policy restricted(Policy p, std::vector<Site> allowed) {
  p.allowed = std::move(allowed);
  return p;
}

struct TopplingState {
  Configuration config;
  Odometer odometer;
  InstructionStack stack;
  std::optional<std::vector<Site>> trace;  // recorded toppling sequence, off by default

  TopplingState(Configuration c, InstructionStack s)
      : config(std::move(c)), odometer(config.n()), stack(std::move(s)) {}

  static TopplingState init(const Params& p) {
    return TopplingState(sample_initial(p), InstructionStack(p.seed, p.lambda));
  }

  std::uint64_t total_T() const { return odometer.total(); }
};

// One legal topple: consume slot h(x)+1 and apply it.
inline Effect topple(TopplingState& st, Site x) {
  if (st.config.active_at(x) < 1) throw IllegalTopple(x);
  std::uint64_t j = st.odometer.at(x) + 1;
  Effect e = apply_instruction(st.config, x, st.stack.at(x, j));
  st.odometer.increment(x);
  if (st.trace) st.trace->push_back(x);
  return e;
}

enum class Status { Stabilized, BudgetExceeded };

struct Outcome {
  Status status = Status::Stabilized;
  std::uint64_t T = 0;  // exact when Stabilized, count at cap otherwise
  Configuration config;
  Odometer odometer;
};

namespace detail {

// Set of currently toppleable sites with O(1) insert/erase/sample (swap-pop).
class ActiveIndex {
 public:
  explicit ActiveIndex(Site n) : pos_(static_cast<std::size_t>(n), -1) {}

  bool contains(Site x) const { return pos_[static_cast<std::size_t>(x)] >= 0; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  Site at(std::size_t i) const { return items_[i]; }

  void insert(Site x) {
    pos_[static_cast<std::size_t>(x)] = static_cast<std::int64_t>(items_.size());
    items_.push_back(x);
  }

  void erase(Site x) {
    std::int64_t i = pos_[static_cast<std::size_t>(x)];
    Site last = items_.back();
    items_[static_cast<std::size_t>(i)] = last;
    pos_[static_cast<std::size_t>(last)] = i;
    items_.pop_back();
    pos_[static_cast<std::size_t>(x)] = -1;
  }

 private:
  std::vector<Site> items_;
  std::vector<std::int64_t> pos_;
};

struct RandomSel {
  rng::Sequential seq;
  Site pick(const ActiveIndex& idx) { return idx.at(seq.below(idx.size())); }
  void on_insert(Site) {}
  void on_erase(Site) {}
};

struct LeftmostSel {
  std::set<Site> sites;
  Site pick(const ActiveIndex&) { return *sites.begin(); }
  void on_insert(Site x) { sites.insert(x); }
  void on_erase(Site x) { sites.erase(x); }
};

struct SweepSel {
  Site n = 0;
  Site cursor = 0;
  Site pick(const ActiveIndex& idx) {
    while (!idx.contains(cursor)) cursor = (cursor + 1 == n) ? 0 : cursor + 1;
    return cursor;
  }
  void on_insert(Site) {}
  void on_erase(Site) {}
};

template <class Sel>
Status drive(TopplingState& st, const std::vector<std::uint8_t>& allowed,
             bool ignore_sleeps, std::uint64_t budget, Sel& sel) {
  const Site n = st.config.n();
  std::vector<std::uint64_t> keys(static_cast<std::size_t>(n));
  for (Site x = 0; x < n; ++x) keys[static_cast<std::size_t>(x)] = st.stack.key_for(x);

  auto eligible = [&](Site x) {
    return st.config.active_at(x) > 0 &&
           (allowed.empty() || allowed[static_cast<std::size_t>(x)]);
  };

  ActiveIndex idx(n);
  for (Site x = 0; x < n; ++x) {
    if (eligible(x)) {
      idx.insert(x);
      sel.on_insert(x);
    }
  }

  const bool no_mask = !st.stack.has_mask();
  const bool tracing = st.trace.has_value();
  while (!idx.empty()) {
    if (st.odometer.total() >= budget) return Status::BudgetExceeded;
    Site x = sel.pick(idx);
    std::uint64_t j = st.odometer.at(x) + 1;
    std::uint64_t skey = keys[static_cast<std::size_t>(x)];
    Instruction ins = no_mask ? st.stack.raw_at_key(skey, j) : st.stack.at_key(skey, x, j);
    if (ignore_sleeps && ins == Instruction::Sleep) ins = Instruction::Null;
    Effect e = apply_instruction(st.config, x, ins);
    st.odometer.increment(x);
    if (tracing) st.trace->push_back(x);

    if (!eligible(x) && idx.contains(x)) {
      idx.erase(x);
      sel.on_erase(x);
    }
    if (e.kind == Effect::Kind::Moved && eligible(e.dest) && !idx.contains(e.dest)) {
      idx.insert(e.dest);
      sel.on_insert(e.dest);
    }
  }
  return Status::Stabilized;
}

}  // namespace detail

struct StabilizeOptions {
  std::uint64_t budget = kDefaultBudget;
  bool ignore_sleeps = false;  // treat sleep slots as null when applying
};

// Runs the given state until no allowed site is toppleable (or budget).
inline Status run_policy(TopplingState& st, const Policy& p,
                         const StabilizeOptions& opt = {}) {
  std::vector<std::uint8_t> allowed;
  if (p.allowed) {
    allowed.assign(static_cast<std::size_t>(st.config.n()), 0);
    for (Site x : *p.allowed) allowed[static_cast<std::size_t>(wrap(x, st.config.n()))] = 1;
  }
  switch (p.kind) {
    case Policy::Kind::Leftmost: {
      detail::LeftmostSel sel;
      return detail::drive(st, allowed, opt.ignore_sleeps, opt.budget, sel);
    }
    case Policy::Kind::Random: {
      detail::RandomSel sel{
          rng::Sequential(rng::stream_key(p.seed ^ st.stack.seed(), rng::Stream::Policy))};
      return detail::drive(st, allowed, opt.ignore_sleeps, opt.budget, sel);
    }
    case Policy::Kind::Sweep: {
      detail::SweepSel sel{st.config.n(), 0};
      return detail::drive(st, allowed, opt.ignore_sleeps, opt.budget, sel);
    }
  }
  throw std::logic_error("unreachable policy kind");
}

// Topples only sites in `allowed_sites` until none of them is toppleable.
// Other sites may hold active particles when this returns Stabilized.
inline Status restricted_stabilize(TopplingState& st, const std::vector<Site>& allowed_sites,
                                   const StabilizeOptions& opt = {},
                                   const Policy& base = Policy::random()) {
  Policy p = base;
  p.allowed = allowed_sites;
  return run_policy(st, p, opt);
}

inline Outcome stabilize_state(TopplingState&& st, const Policy& p = Policy::random(),
                               std::uint64_t budget = kDefaultBudget) {
  Status s = run_policy(st, p, {budget, false});
  return Outcome{s, st.odometer.total(), std::move(st.config), std::move(st.odometer)};
}

inline Outcome stabilize(const Params& params, const Policy& p = Policy::random(),
                         std::uint64_t budget = kDefaultBudget) {
  params.validate();
  return stabilize_state(TopplingState::init(params), p, budget);
}

inline Outcome stabilize_from(Configuration c, InstructionStack s,
                              const Policy& p = Policy::random(),
                              std::uint64_t budget = kDefaultBudget) {
  return stabilize_state(TopplingState(std::move(c), std::move(s)), p, budget);
}

enum class CheckOutcome { Pass, Fail, Indeterminate, InvalidMask };

inline const char* name(CheckOutcome c) {
  switch (c) {
    case CheckOutcome::Pass: return "pass";
    case CheckOutcome::Fail: return "fail";
    case CheckOutcome::Indeterminate: return "indeterminate";
    case CheckOutcome::InvalidMask: return "invalid-mask";
  }
  return "?";
}

// Stabilizes the same (initial config, stack) under two policies and compares
// the results exactly.  Budget exhaustion on either run is Indeterminate.
inline CheckOutcome check_abelian(const Params& params, const Policy& pa, const Policy& pb,
                                  std::uint64_t budget = kDefaultBudget) {
  Outcome a = stabilize(params, pa, budget);
  Outcome b = stabilize(params, pb, budget);
  if (a.status == Status::BudgetExceeded || b.status == Status::BudgetExceeded)
    return CheckOutcome::Indeterminate;
  bool same = a.config == b.config && a.odometer == b.odometer && a.T == b.T;
  return same ? CheckOutcome::Pass : CheckOutcome::Fail;
}

// Any legal partial toppling sequence is dominated pointwise by the full
// stabilizing odometer.
inline CheckOutcome check_least_action(const Params& params, std::uint64_t prefix_len,
                                       std::uint64_t prefix_seed = 0,
                                       std::uint64_t budget = kDefaultBudget) {
  Outcome full = stabilize(params, Policy::leftmost(), budget);
  if (full.status == Status::BudgetExceeded) return CheckOutcome::Indeterminate;
  TopplingState prefix = TopplingState::init(params);
  run_policy(prefix, Policy::random(prefix_seed), {prefix_len, false});
  return pointwise_leq(prefix.odometer, full.odometer) ? CheckOutcome::Pass
                                                       : CheckOutcome::Fail;
}

// Masking sleeps can only push the odometer up.  The masked run may hit the
// budget; domination at the cap is still conclusive, its absence is not.
inline CheckOutcome check_sleep_monotonicity(const Params& params, const SleepMask& mask,
                                             std::uint64_t budget = kDefaultBudget) {
  TopplingState base = TopplingState::init(params);
  if (base.stack.with_mask(mask).has_mask()) {
    InstructionStack masked_stack = base.stack.with_mask(mask);
    if (!invalid_mask_entries(masked_stack).empty()) return CheckOutcome::InvalidMask;
  }
  Configuration initial = base.config;
  Status sb = run_policy(base, Policy::random(), {budget, false});
  if (sb == Status::BudgetExceeded) return CheckOutcome::Indeterminate;

  TopplingState masked(initial, base.stack.with_mask(mask));
  Status sm = run_policy(masked, Policy::random(), {budget, false});
  if (pointwise_leq(base.odometer, masked.odometer)) return CheckOutcome::Pass;
  return sm == Status::BudgetExceeded ? CheckOutcome::Indeterminate : CheckOutcome::Fail;
}

}  // namespace arw
