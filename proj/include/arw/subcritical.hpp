#pragma once

// Two-phase constructive stabilization for the low-density regime.
//
// Phase 1 (gather): treat every sleep as null and let particles walk until
// they are absorbed at sources, one per interval of length ~ c0 ln n.
// Phase 2 (traps): for each source, settle its m particles one at a time.
// A bookkeeping exploration (no state change) walks each particle until it
// hits the current barriers, then designates a trap: the site nearest the
// hit barrier whose second-to-last consumed slot is a sleep that the
// exploration ignored.  The real dynamics then replays each particle's
// prefix and executes exactly the designated sleep, so every instruction is
// consumed once and the scheme run is a legal toppling sequence of the
// sleep-masked stack.

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "arw/core.hpp"
#include "arw/engine.hpp"

namespace arw {

struct LayoutTooCoarse : std::runtime_error {
  explicit LayoutTooCoarse(const std::string& why)
      : std::runtime_error("layout too coarse: " + why) {}
};

struct TrapCollision : std::logic_error {
  explicit TrapCollision(Site x)
      : std::logic_error("trap replay disturbed a settled particle at site " +
                         std::to_string(x)) {}
};

struct OutOfWindow : std::invalid_argument {
  OutOfWindow() : std::invalid_argument("site outside the window") {}
};

// Partition of the cycle into K = floor(n/L) intervals, L = floor(c0 ln n);
// the last interval absorbs the remainder (length in [L, 2L)).  Sources sit
// at interval midpoints.
struct SourceLayout {
  Site n = 0;
  double c0 = 0;
  Site interval_len = 0;            // L
  std::vector<Site> start, len;     // interval i = [start[i], start[i]+len[i])
  std::vector<Site> source;         // z_i, strictly inside interval i
};

inline SourceLayout make_layout(Site n, double c0) {
  if (n < 2) throw std::invalid_argument("n must be >= 2");
  if (!(c0 > 0)) throw std::invalid_argument("c0 must be positive");
  Site L = static_cast<Site>(std::floor(c0 * std::log(static_cast<double>(n))));
  if (L < 2) throw LayoutTooCoarse("interval length " + std::to_string(L) + " < 2");
  if (L > n) throw LayoutTooCoarse("interval longer than the cycle");
  Site K = n / L;
  SourceLayout lay;
  lay.n = n;
  lay.c0 = c0;
  lay.interval_len = L;
  for (Site i = 0; i < K; ++i) {
    Site s = i * L;
    Site l = (i + 1 < K) ? L : n - s;
    lay.start.push_back(s);
    lay.len.push_back(l);
    lay.source.push_back(s + l / 2);
  }
  return lay;
}

// Gambler's ruin: chance a symmetric walk from x in [left, right] hits right
// before left.
inline double hit_prob(Site left, Site right, Site x) {
  if (right <= left || x < left || x > right) throw OutOfWindow();
  return static_cast<double>(x - left) / static_cast<double>(right - left);
}

struct GatherResult {
  Status status = Status::Stabilized;
  Configuration config;
  std::uint64_t T1 = 0;
};

// Runs phase 1 on an existing state; consumed instructions land in the
// state's odometer.  Post (on Stabilized): mass only at sources.
inline Status gather_phase(TopplingState& st, const SourceLayout& lay,
                           std::uint64_t budget = kDefaultBudget) {
  std::vector<std::uint8_t> is_source(static_cast<std::size_t>(lay.n), 0);
  for (Site z : lay.source) is_source[static_cast<std::size_t>(z)] = 1;
  std::vector<Site> allowed;
  for (Site x = 0; x < lay.n; ++x)
    if (!is_source[static_cast<std::size_t>(x)]) allowed.push_back(x);
  return restricted_stabilize(st, allowed, {budget, true});
}

inline GatherResult gather_phase(const Params& p, const SourceLayout& lay,
                                 std::uint64_t budget = kDefaultBudget) {
  TopplingState st = TopplingState::init(p);
  GatherResult r;
  r.status = gather_phase(st, lay, budget);
  r.T1 = st.total_T();
  r.config = std::move(st.config);
  return r;
}

// Read-only view of one source's neighborhood in local coordinates
// (local 0 = the source), plus the shared per-site consumption cursor used
// by explorations.
struct StackWindow {
  const InstructionStack* stack = nullptr;
  Site n = 0;
  Site center = 0;
  std::vector<std::uint64_t>* cursor = nullptr;  // size n, global site index

  Site global(Site local) const { return wrap(center + local, n); }
};

struct TrapPlan {
  Site r = 0;
  std::int64_t m = 0;
  bool success = false;
  std::int64_t failed_particle = -1;  // first particle with no trap, or -1
  std::vector<Site> a, b;             // barrier history, local coords; a[0] = -r/2

  struct Trap {
    Site local = 0;            // trap site, local coords, never 0
    std::uint64_t slot = 0;    // designated sleep slot at that site
  };
  std::vector<Trap> traps;               // one per settled particle
  std::vector<std::uint8_t> hit_left;    // barrier side per explored particle
  std::vector<Site> advance;             // barrier advance per settled particle
  std::uint64_t explored = 0;            // slots inspected by explorations
};

// Phase-2 planning for one source: explorations only; consumes nothing from
// the dynamics.  `win.cursor` must reflect every slot consumed so far
// (gather plus earlier explorations sharing the window boundary).
inline TrapPlan set_traps(const StackWindow& win, Site r, std::int64_t m) {
  if (r < 2 || r % 2 != 0) throw std::invalid_argument("trap radius must be even, >= 2");
  if (r + 1 > win.n) throw std::invalid_argument("window exceeds the cycle");

  TrapPlan plan;
  plan.r = r;
  plan.m = m;
  plan.a.push_back(-r / 2);
  plan.b.push_back(r / 2);

  std::vector<std::uint64_t>& cur = *win.cursor;
  std::vector<std::uint64_t> prev(static_cast<std::size_t>(r) + 1);
  for (std::int64_t i = 0; i < m; ++i) {
    const Site a = plan.a.back(), b = plan.b.back();
    // Snapshot for the own-consumption invariant check below.
    for (Site u = -r / 2; u <= r / 2; ++u)
      prev[static_cast<std::size_t>(u + r / 2)] = cur[static_cast<std::size_t>(win.global(u))];

    Site pos = 0;
    while (pos != a && pos != b) {
      std::size_t g = static_cast<std::size_t>(win.global(pos));
      std::uint64_t j = ++cur[g];
      plan.explored += 1;
      switch (win.stack->raw_at(static_cast<Site>(g), j)) {
        case Instruction::JumpLeft: --pos; break;
        case Instruction::JumpRight: ++pos; break;
        default: break;  // sleep: ignored during exploration
      }
    }
    const bool left = pos == a;
    plan.hit_left.push_back(left ? 1 : 0);

    // Scan from the hit barrier toward 0 (exclusive) for the nearest trap.
    Site trap = 0;
    const Site step = left ? 1 : -1;
    for (Site v = pos + step; v != 0; v += step) {
      std::size_t g = static_cast<std::size_t>(win.global(v));
      std::uint64_t c = cur[g];
      if (c < 2) continue;
      if (win.stack->raw_at(static_cast<Site>(g), c - 1) != Instruction::Sleep) continue;
      // The particle crossed v, so slot c is its own final departure; a
      // sleep at c-1 therefore also belongs to this exploration (earlier
      // consumers always end on a jump).
      if (c - 1 <= prev[static_cast<std::size_t>(v + r / 2)])
        throw std::logic_error("trap slot consumed by an earlier phase");
      if (win.stack->raw_at(static_cast<Site>(g), c) !=
          (left ? Instruction::JumpLeft : Instruction::JumpRight))
        throw std::logic_error("final departure direction contradicts the hit barrier");
      trap = v;
      plan.traps.push_back({v, c - 1});
      plan.advance.push_back(left ? v - a : b - v);
      break;
    }
    if (trap == 0) {
      plan.failed_particle = i;
      return plan;  // success stays false; barriers already crossed to 0
    }
    plan.a.push_back(left ? trap : a);
    plan.b.push_back(left ? b : trap);
  }
  plan.success = true;
  return plan;
}

// Replays each settled particle's prefix through the real dynamics and
// executes its designated sleep.  Consumes into st's odometer; every slot
// consumed here was consumed by the planning exploration and nothing else.
inline Status run_traps(TopplingState& st, const TrapPlan& plan, Site center,
                        std::uint64_t budget = kDefaultBudget) {
  const Site n = st.config.n();
  for (const TrapPlan::Trap& trap : plan.traps) {
    Site pos = 0;
    while (true) {
      if (st.total_T() >= budget) return Status::BudgetExceeded;
      Site g = wrap(center + pos, n);
      std::uint64_t j = st.odometer.at(g) + 1;
      if (pos == trap.local) {
        if (j > trap.slot) throw std::logic_error("replay overran the designated slot");
        if (j == trap.slot) {
          if (st.stack.raw_at(g, j) != Instruction::Sleep)
            throw std::logic_error("designated slot is not a sleep");
          if (st.config.mass_at(g) != 1 || st.config.active_at(g) != 1)
            throw TrapCollision(g);
          st.config.sleep_at(g);
          st.odometer.increment(g);
          break;
        }
      }
      Instruction ins = st.stack.raw_at(g, j);
      st.odometer.increment(g);
      if (ins == Instruction::JumpLeft || ins == Instruction::JumpRight) {
        Site npos = pos + (ins == Instruction::JumpLeft ? -1 : 1);
        Site ng = wrap(center + npos, n);
        if (st.config.sleepy_at(ng)) throw TrapCollision(ng);
        st.config.remove_active(g);
        st.config.add_active(ng);
        pos = npos;
      }
      // Non-designated sleeps are ignored: consumed, particle stays.
    }
  }
  return Status::Stabilized;
}

struct PhaseReport {
  Status status = Status::Stabilized;
  bool overall_success = false;
  std::uint64_t T1 = 0, T2 = 0;
  Site interval_len = 0;
  std::int64_t intervals = 0;
  std::vector<std::int64_t> source_counts;
  std::vector<std::uint8_t> interval_success;
  std::vector<std::uint8_t> hit_left;  // pooled over intervals
  std::vector<Site> advance;           // pooled over intervals
  Configuration final_config;
  Odometer odometer;
};

// Full two-phase scheme.  On overall success the final configuration is
// stable with every particle asleep at a trap; a failed interval leaves its
// particles active at the source and is reported, not retried.
inline PhaseReport full_scheme(const Params& params, double c0 = 10.0,
                               std::uint64_t budget = kDefaultBudget) {
  params.validate();
  SourceLayout lay = make_layout(params.n, c0);
  TopplingState st = TopplingState::init(params);

  PhaseReport rep;
  rep.interval_len = lay.interval_len;
  rep.intervals = static_cast<std::int64_t>(lay.source.size());
  rep.status = gather_phase(st, lay, budget);
  rep.T1 = st.total_T();
  if (rep.status == Status::BudgetExceeded) {
    rep.final_config = std::move(st.config);
    rep.odometer = std::move(st.odometer);
    return rep;
  }

  std::vector<std::uint64_t> cursor = st.odometer.values();
  bool all = true;
  for (std::size_t i = 0; i < lay.source.size(); ++i) {
    Site z = lay.source[i];
    std::int64_t m = st.config.active_at(z);
    rep.source_counts.push_back(m);
    Site r = lay.len[i] & ~Site(1);
    StackWindow win{&st.stack, params.n, z, &cursor};
    TrapPlan plan = set_traps(win, r, m);
    rep.hit_left.insert(rep.hit_left.end(), plan.hit_left.begin(), plan.hit_left.end());
    rep.advance.insert(rep.advance.end(), plan.advance.begin(), plan.advance.end());
    if (plan.success) {
      if (run_traps(st, plan, z, budget) == Status::BudgetExceeded) {
        rep.status = Status::BudgetExceeded;
        rep.interval_success.push_back(0);
        all = false;
        break;
      }
      rep.interval_success.push_back(1);
    } else {
      rep.interval_success.push_back(0);
      all = false;
    }
  }
  rep.T2 = st.total_T() - rep.T1;
  rep.overall_success = all && rep.status == Status::Stabilized;
  rep.final_config = std::move(st.config);
  rep.odometer = std::move(st.odometer);
  return rep;
}

// Standalone trap experiment on a fresh ring: m particles at the center,
// nothing consumed yet.  Exercises phase 2 in isolation.
inline TrapPlan run_trap_plan(std::uint64_t seed, double lambda, Site r, std::int64_t m) {
  Site ring = 2 * r + 2;
  InstructionStack stack(seed, lambda);
  std::vector<std::uint64_t> cursor(static_cast<std::size_t>(ring), 0);
  StackWindow win{&stack, ring, r, &cursor};
  return set_traps(win, r, m);
}

}  // namespace arw
