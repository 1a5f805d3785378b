#pragma once

// Loop scheme for the high-density regime.  Particles are relabeled at the
// start of each stabilization step: X particles follow the dynamics, Y
// particles are inert but wakeable and keep their label until the next
// relabeling.  Steps A/B/C differ in which particles are X and which sites
// may topple (A: everything but the two poles; B: walkers from pole 0, site
// r excluded; C: walkers from pole r, site 0 excluded).  Every topple here
// is a legal topple of the same stack, so the loop's instruction count never
// exceeds the engine's stabilization total.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "arw/core.hpp"
#include "arw/engine.hpp"

namespace arw {

struct OddCycle : std::invalid_argument {
  OddCycle() : std::invalid_argument("loop scheme needs an even cycle (poles 0 and n/2)") {}
};

enum class StepVariant { A, B, C };

inline const char* name(StepVariant v) {
  switch (v) {
    case StepVariant::A: return "A";
    case StepVariant::B: return "B";
    case StepVariant::C: return "C";
  }
  return "?";
}

// Particle-level state.  Site occupancy is derived and kept in sync; the
// sleeping particle at a site (if any) is tracked by id so wakes preserve
// labels.
class LabeledState {
 public:
  LabeledState(const Configuration& initial, InstructionStack stack)
      : n_(initial.n()),
        pole_(initial.n() / 2),
        stack_(std::move(stack)),
        odometer_(initial.n()),
        count_(static_cast<std::size_t>(initial.n()), 0),
        sleeper_(static_cast<std::size_t>(initial.n()), -1) {
    if (n_ % 2 != 0) throw OddCycle();
    for (Site x = 0; x < n_; ++x) {
      for (std::int64_t k = 0; k < initial.active_at(x); ++k) add_particle(x, false);
      if (initial.sleepy_at(x)) add_particle(x, true);
    }
  }

  Site n() const { return n_; }
  Site pole() const { return pole_; }
  const InstructionStack& stack() const { return stack_; }
  const Odometer& odometer() const { return odometer_; }
  std::uint64_t total_T() const { return odometer_.total(); }

  std::int64_t particles() const { return static_cast<std::int64_t>(pos_.size()); }
  Site position(std::int64_t id) const { return pos_[static_cast<std::size_t>(id)]; }
  bool asleep(std::int64_t id) const { return asleep_[static_cast<std::size_t>(id)] != 0; }
  bool is_x(std::int64_t id) const { return label_x_[static_cast<std::size_t>(id)] != 0; }

  std::int64_t asleep_total() const {
    std::int64_t a = 0;
    for (std::uint8_t s : asleep_) a += s;
    return a;
  }

  // Site-level projection (for comparisons against the engine).
  Configuration site_view() const {
    Configuration c(n_);
    for (std::size_t id = 0; id < pos_.size(); ++id)
      if (!asleep_[id]) c.add_active(pos_[id]);
    for (std::size_t id = 0; id < pos_.size(); ++id) {
      if (asleep_[id]) {
        if (c.active_at(pos_[id]) > 0)
          throw std::logic_error("sleeper sharing a site with an active particle");
        c.add_active(pos_[id]);
        c.sleep_at(pos_[id]);
      }
    }
    return c;
  }

  struct StepStats {
    Status status = Status::Stabilized;
    std::uint64_t T = 0;
    std::int64_t sleeps = 0;
    std::int64_t wakes = 0;
  };

  // Relabels, then topples allowed sites holding active X particles until
  // none remains.  When several X particles share a site the lowest id moves.
  StepStats run_step(StepVariant v, std::uint64_t budget) {
    relabel(v);
    // A: both poles excluded; B: only r excluded; C: only 0 excluded.
    std::vector<std::uint8_t> allowed(static_cast<std::size_t>(n_), 1);
    allowed[0] = v == StepVariant::B ? 1 : 0;
    allowed[static_cast<std::size_t>(pole_)] = v == StepVariant::C ? 1 : 0;

    std::vector<Site> work;  // sites with active X, allowed; may hold stale entries
    std::vector<std::uint8_t> queued(static_cast<std::size_t>(n_), 0);
    auto enqueue = [&](Site x) {
      std::size_t xi = static_cast<std::size_t>(x);
      if (!queued[xi] && allowed[xi] && !xheap_[xi].empty()) {
        queued[xi] = 1;
        work.push_back(x);
      }
    };
    for (Site x = 0; x < n_; ++x) enqueue(x);

    StepStats stats;
    std::uint64_t t0 = odometer_.total();
    while (!work.empty()) {
      Site x = work.back();
      std::size_t xi = static_cast<std::size_t>(x);
      if (xheap_[xi].empty()) {  // stale
        work.pop_back();
        queued[xi] = 0;
        continue;
      }
      if (odometer_.total() >= budget) {
        stats.status = Status::BudgetExceeded;
        break;
      }
      std::uint64_t j = odometer_.at(x) + 1;
      Instruction ins = stack_.raw_at(x, j);
      odometer_.increment(x);
      switch (ins) {
        case Instruction::JumpLeft:
        case Instruction::JumpRight: {
          std::int64_t id = pop_min(xi);
          Site d = wrap(x + (ins == Instruction::JumpLeft ? -1 : 1), n_);
          std::size_t di = static_cast<std::size_t>(d);
          count_[xi] -= 1;
          count_[di] += 1;
          pos_[static_cast<std::size_t>(id)] = d;
          if (sleeper_[di] >= 0) {
            std::int64_t w = sleeper_[di];
            sleeper_[di] = -1;
            asleep_[static_cast<std::size_t>(w)] = 0;
            stats.wakes += 1;
            if (label_x_[static_cast<std::size_t>(w)]) push(di, w);
          }
          push(di, id);
          enqueue(d);
          break;
        }
        case Instruction::Sleep:
          if (count_[xi] == 1) {
            std::int64_t id = pop_min(xi);
            asleep_[static_cast<std::size_t>(id)] = 1;
            sleeper_[xi] = id;
            stats.sleeps += 1;
          }
          break;
        case Instruction::Null:
          break;
      }
    }
    stats.T = odometer_.total() - t0;
    return stats;
  }

 private:
  void add_particle(Site x, bool sleeping) {
    std::int64_t id = static_cast<std::int64_t>(pos_.size());
    pos_.push_back(x);
    asleep_.push_back(sleeping ? 1 : 0);
    label_x_.push_back(0);
    count_[static_cast<std::size_t>(x)] += 1;
    if (sleeping) {
      if (sleeper_[static_cast<std::size_t>(x)] >= 0)
        throw std::logic_error("two sleepers on one site");
      sleeper_[static_cast<std::size_t>(x)] = id;
    }
  }

  void relabel(StepVariant v) {
    xheap_.assign(static_cast<std::size_t>(n_), {});
    for (std::size_t id = 0; id < pos_.size(); ++id) {
      Site p = pos_[id];
      bool x_label = false;
      switch (v) {
        case StepVariant::A: x_label = p != 0 && p != pole_; break;
        case StepVariant::B: x_label = p == 0; break;
        case StepVariant::C: x_label = p == pole_; break;
      }
      label_x_[id] = x_label ? 1 : 0;
      if (x_label && !asleep_[id]) push(static_cast<std::size_t>(p), static_cast<std::int64_t>(id));
    }
  }

  void push(std::size_t site, std::int64_t id) {
    auto& h = xheap_[site];
    h.push_back(id);
    std::push_heap(h.begin(), h.end(), std::greater<>());
  }

  std::int64_t pop_min(std::size_t site) {
    auto& h = xheap_[site];
    std::pop_heap(h.begin(), h.end(), std::greater<>());
    std::int64_t id = h.back();
    h.pop_back();
    return id;
  }

  Site n_;
  Site pole_;
  InstructionStack stack_;
  Odometer odometer_;
  std::vector<Site> pos_;
  std::vector<std::uint8_t> asleep_;
  std::vector<std::uint8_t> label_x_;
  std::vector<std::int32_t> count_;
  std::vector<std::int64_t> sleeper_;
  std::vector<std::vector<std::int64_t>> xheap_;  // active X ids per site, min-heap
};

struct LoopReport {
  enum class Termination { AllAsleep, MaxRounds, BudgetExceeded };
  Termination termination = Termination::MaxRounds;
  std::uint64_t rounds = 0;
  std::uint64_t T = 0;
  std::int64_t final_asleep = 0;
  std::int64_t particles = 0;
  std::vector<std::int64_t> asleep_per_round;
};

inline const char* name(LoopReport::Termination t) {
  switch (t) {
    case LoopReport::Termination::AllAsleep: return "all-asleep";
    case LoopReport::Termination::MaxRounds: return "max-rounds";
    case LoopReport::Termination::BudgetExceeded: return "budget-exceeded";
  }
  return "?";
}

// Repeats (A, B, C) rounds until everything sleeps, a round cap, or the
// instruction budget.
inline LoopReport run_loop_state(LabeledState& ls, std::uint64_t max_rounds,
                                 std::uint64_t budget) {
  LoopReport rep;
  rep.particles = ls.particles();
  rep.termination = LoopReport::Termination::MaxRounds;
  while (rep.rounds < max_rounds) {
    if (ls.asleep_total() == ls.particles()) break;
    bool budget_hit = false;
    for (StepVariant v : {StepVariant::A, StepVariant::B, StepVariant::C}) {
      if (ls.run_step(v, budget).status == Status::BudgetExceeded) {
        budget_hit = true;
        break;
      }
    }
    rep.rounds += 1;
    rep.asleep_per_round.push_back(ls.asleep_total());
    if (budget_hit) {
      rep.termination = LoopReport::Termination::BudgetExceeded;
      break;
    }
  }
  if (rep.termination != LoopReport::Termination::BudgetExceeded &&
      ls.asleep_total() == ls.particles()) {
    rep.termination = LoopReport::Termination::AllAsleep;
  }
  rep.T = ls.total_T();
  rep.final_asleep = ls.asleep_total();
  return rep;
}

inline LoopReport run_loop(const Params& params, std::uint64_t max_rounds = 1'000'000,
                           std::uint64_t budget = kDefaultBudget) {
  params.validate();
  if (params.n % 2 != 0) throw OddCycle();
  LabeledState ls(sample_initial(params), InstructionStack(params.seed, params.lambda));
  return run_loop_state(ls, max_rounds, budget);
}

// Sites strictly between lo and hi (walking forward from lo) holding a
// sleeping particle.
inline std::int64_t sleepy_interior_count(const Configuration& c, Site lo, Site hi) {
  std::int64_t k = 0;
  for (Site x = wrap(lo + 1, c.n()); x != wrap(hi, c.n()); x = wrap(x + 1, c.n()))
    k += c.sleepy_at(x) ? 1 : 0;
  return k;
}

}  // namespace arw
