#pragma once

// Trial orchestration and statistical reports.
//
// A sweep enumerates the Cartesian product of (n, mu, lambda) in a fixed
// order; every trial seed is derived from (master seed, cell index, trial
// index), so a grid is reproducible regardless of how many workers run it.
// Workers claim trials from a shared queue but write into pre-assigned
// slots, keeping the output order deterministic.
//
// Censored trials (budget, round cap, or an unfinished scheme) carry T as a
// lower bound.  Every summary statistic here is median-based and reports the
// censoring fraction alongside; a median computed from a cell that is at
// least half censored is flagged rather than trusted.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "engine.hpp"
#include "oracle.hpp"
#include "records.hpp"
#include "rng.hpp"
#include "subcritical.hpp"
#include "supercritical.hpp"

namespace arw {

struct RunOptions {
  std::uint64_t budget = kDefaultBudget;
  std::uint64_t max_rounds = 1'000'000;  // loop scheme only
  double c0 = 10.0;                      // subcritical scheme only
  Policy policy = Policy::random();      // direct / pointmass schemes only
};

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t cell,
                                std::uint64_t trial) {
  std::uint64_t k = rng::stream_key(master, rng::Stream::TrialSeed);
  k = rng::mix64(k + cell * rng::kGamma);
  return rng::mix64(k + trial * rng::kGamma);
}

inline unsigned worker_count() {
  if (const char* env = std::getenv("ARW_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 4096)
      return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

// One grid cell: fixed parameters, several trials.
struct CellSpec {
  std::uint32_t n = 0;
  double mu = 0.0;
  double lambda = 0.0;
  Scheme scheme = Scheme::Direct;
  std::uint32_t trials = 1;
  RunOptions opts;
};

// Runs a single trial with an already-derived seed.  Scheme failures are an
// outcome, not an error: an unfinished run is recorded as censored with
// whatever T it accumulated.
inline TrialRecord run_one(const CellSpec& cell, std::uint64_t master,
                           std::uint32_t trial, std::uint64_t derived) {
  TrialRecord rec;
  rec.n = cell.n;
  rec.mu = cell.mu;
  rec.lambda = cell.lambda;
  rec.seed = master;
  rec.trial = trial;
  rec.scheme = cell.scheme;

  Params p{static_cast<Site>(cell.n), cell.mu, cell.lambda, derived};
  auto started = std::chrono::steady_clock::now();
  switch (cell.scheme) {
    case Scheme::Direct:
    case Scheme::PointMass: {
      Policy pol = cell.opts.policy;
      if (pol.kind == Policy::Kind::Random) pol.seed = derived;
      Outcome out =
          cell.scheme == Scheme::Direct
              ? stabilize(p, pol, cell.opts.budget)
              : stabilize_from(Configuration::point_mass(
                                   p.n, static_cast<std::int64_t>(p.mu * p.n)),
                               InstructionStack(derived, p.lambda), pol,
                               cell.opts.budget);
      rec.T = out.T;
      rec.outcome = out.status == Status::Stabilized ? TrialOutcome::Fixed
                                                     : TrialOutcome::Censored;
      rec.sleepers = static_cast<std::uint64_t>(out.config.sleeper_total());
      break;
    }
    case Scheme::Subcritical: {
      try {
        PhaseReport rep = full_scheme(p, cell.opts.c0, cell.opts.budget);
        rec.T = rep.T1 + rep.T2;
        bool done = rep.status == Status::Stabilized && rep.overall_success;
        rec.outcome = done ? TrialOutcome::Fixed : TrialOutcome::Censored;
        rec.sleepers =
            static_cast<std::uint64_t>(rep.final_config.sleeper_total());
      } catch (const LayoutTooCoarse&) {
        rec.outcome = TrialOutcome::Censored;  // n too small for c0
      }
      break;
    }
    case Scheme::Loop: {
      LoopReport rep = run_loop(p, cell.opts.max_rounds, cell.opts.budget);
      rec.T = rep.T;
      rec.outcome = rep.termination == LoopReport::Termination::AllAsleep
                        ? TrialOutcome::Fixed
                        : TrialOutcome::Censored;
      rec.sleepers = static_cast<std::uint64_t>(rep.final_asleep);
      rec.rounds = rep.rounds;
      break;
    }
  }
  auto elapsed = std::chrono::steady_clock::now() - started;
  rec.wall_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count());
  return rec;
}

// Runs every (cell, trial) pair.  Output index = position in the flattened
// (cell, trial) enumeration, independent of worker scheduling.
inline std::vector<TrialRecord> run_cells(const std::vector<CellSpec>& cells,
                                          std::uint64_t master) {
  struct Task {
    std::size_t cell;
    std::uint32_t trial;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::uint32_t t = 0; t < cells[c].trials; ++t) tasks.push_back({c, t});

  std::vector<TrialRecord> records(tasks.size());
  if (tasks.empty()) return records;

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      try {
        records[i] = run_one(cells[t.cell], master, t.trial,
                             trial_seed(master, t.cell, t.trial));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  unsigned workers = std::min<std::size_t>(worker_count(), tasks.size());
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

inline std::vector<TrialRecord> run_trials(const Params& p, std::uint32_t trials,
                                           Scheme scheme, RunOptions opts = {}) {
  CellSpec cell{static_cast<std::uint32_t>(p.n), p.mu, p.lambda,
                scheme,                          trials, opts};
  return run_cells({cell}, p.seed);
}

struct SweepGrid {
  std::vector<std::uint32_t> ns;
  std::vector<double> mus;
  std::vector<double> lambdas;
  std::uint32_t trials = 1;
  Scheme scheme = Scheme::Direct;
  RunOptions opts;
};

// Cartesian product in (n, mu, lambda) order, n slowest.
inline std::vector<CellSpec> expand(const SweepGrid& g) {
  std::vector<CellSpec> cells;
  for (std::uint32_t n : g.ns)
    for (double mu : g.mus)
      for (double lambda : g.lambdas)
        cells.push_back({n, mu, lambda, g.scheme, g.trials, g.opts});
  return cells;
}

inline std::vector<TrialRecord> run_grid(const SweepGrid& g, std::uint64_t master) {
  return run_cells(expand(g), master);
}

// Lower median: element at index (k-1)/2 of the sorted sample.
inline std::uint64_t lower_median(std::vector<std::uint64_t> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::size_t idx = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

inline std::uint64_t percentile95(std::vector<std::uint64_t> v) {
  if (v.empty()) throw std::invalid_argument("percentile of empty sample");
  std::size_t idx =
      static_cast<std::size_t>(
          std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

struct CellStats {
  std::uint32_t n = 0;
  double mu = 0.0;
  double lambda = 0.0;
  std::size_t trials = 0;
  std::size_t censored = 0;
  std::uint64_t median_T = 0;  // censored values participate as lower bounds
  std::uint64_t p95_T = 0;
  double censored_fraction = 0.0;
  bool too_censored = false;  // >= 50% censored: median is only a lower bound
};

inline CellStats summarize(const std::vector<TrialRecord>& recs) {
  if (recs.empty()) throw std::invalid_argument("summarize of empty cell");
  CellStats s;
  s.n = recs.front().n;
  s.mu = recs.front().mu;
  s.lambda = recs.front().lambda;
  s.trials = recs.size();
  std::vector<std::uint64_t> ts;
  ts.reserve(recs.size());
  for (const TrialRecord& r : recs) {
    ts.push_back(r.T);
    if (r.outcome == TrialOutcome::Censored) ++s.censored;
  }
  s.median_T = lower_median(ts);
  s.p95_T = percentile95(std::move(ts));
  s.censored_fraction =
      static_cast<double>(s.censored) / static_cast<double>(s.trials);
  s.too_censored = 2 * s.censored >= s.trials;
  return s;
}

namespace detail {

// Groups records of a single-(mu, lambda) sweep by n, ascending.
inline std::vector<CellStats> stats_by_n(const std::vector<TrialRecord>& recs) {
  std::vector<std::uint32_t> ns;
  for (const TrialRecord& r : recs)
    if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
  std::sort(ns.begin(), ns.end());
  std::vector<CellStats> out;
  for (std::uint32_t n : ns) {
    std::vector<TrialRecord> cell;
    for (const TrialRecord& r : recs)
      if (r.n == n) cell.push_back(r);
    out.push_back(summarize(cell));
  }
  return out;
}

}  // namespace detail

struct ScalingRow {
  CellStats stats;
  double normalized = 0.0;  // median T / (n ln^2 n)
};

struct ScalingReport {
  std::vector<ScalingRow> rows;  // ascending n
  std::vector<double> ratios;    // normalized medians, consecutive n
  bool violation = false;        // growth > 2x across the largest octave
  bool regime_warning = false;   // mu >= lambda/(1+lambda): not subcritical
};

inline ScalingReport scaling_report_from_records(
    const std::vector<TrialRecord>& recs, double mu, double lambda) {
  ScalingReport rep;
  rep.regime_warning = mu >= lambda / (1.0 + lambda);
  for (CellStats& s : detail::stats_by_n(recs)) {
    double n = static_cast<double>(s.n);
    double logn = std::log(n);
    ScalingRow row;
    row.normalized = static_cast<double>(s.median_T) / (n * logn * logn);
    row.stats = std::move(s);
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i)
    rep.ratios.push_back(rep.rows[i + 1].normalized / rep.rows[i].normalized);
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i)
    if (rep.rows[i + 1].stats.n == 2 * rep.rows[i].stats.n)
      rep.violation = rep.ratios[i] > 2.0;  // last doubling pair wins
  return rep;
}

inline ScalingReport subcritical_scaling_report(const SweepGrid& grid,
                                                std::uint64_t master) {
  if (grid.mus.size() != 1 || grid.lambdas.size() != 1)
    throw std::invalid_argument("scaling report wants a single (mu, lambda)");
  return scaling_report_from_records(run_grid(grid, master), grid.mus[0],
                                     grid.lambdas[0]);
}

struct GrowthReport {
  std::vector<CellStats> rows;  // ascending n
  std::size_t valid_rows = 0;   // rows with a trustworthy (< 50% censored) median
  double slope = 0.0;           // least squares, ln(median T) vs n, valid rows
  bool monotone_increasing = false;  // strict, over valid rows; needs >= 2
};

inline GrowthReport growth_report_from_records(const std::vector<TrialRecord>& recs) {
  GrowthReport rep;
  rep.rows = detail::stats_by_n(recs);
  std::vector<double> xs, ys;
  rep.monotone_increasing = true;
  std::uint64_t prev = 0;
  for (const CellStats& s : rep.rows) {
    if (s.too_censored || s.median_T == 0) continue;
    ++rep.valid_rows;
    if (s.median_T <= prev) rep.monotone_increasing = false;
    prev = s.median_T;
    xs.push_back(static_cast<double>(s.n));
    ys.push_back(std::log(static_cast<double>(s.median_T)));
  }
  if (rep.valid_rows < 2) rep.monotone_increasing = false;
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      num += (xs[i] - mx) * (ys[i] - my);
      den += (xs[i] - mx) * (xs[i] - mx);
    }
    if (den > 0) rep.slope = num / den;
  }
  return rep;
}

inline GrowthReport supercritical_growth_report(const SweepGrid& grid,
                                                std::uint64_t master) {
  return growth_report_from_records(run_grid(grid, master));
}

// ---------------------------------------------------------------------------
// Verification suite.

struct CheckResult {
  std::string name;
  std::size_t passed = 0;
  std::size_t total = 0;
  bool ok() const { return passed == total; }
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_pass = true;
};

struct VerifyConfig {
  std::size_t instances = 100;
  std::uint64_t seed = 1;
};

namespace detail {

inline Params random_instance(rng::Sequential& gen) {
  static constexpr double kMus[] = {0.2, 0.5, 0.8};
  static constexpr double kLambdas[] = {0.2, 1.0, 5.0};
  Params p;
  p.mu = kMus[gen.below(3)];
  p.lambda = kLambdas[gen.below(3)];
  // Deep in the fixating-slowly regime T blows up exponentially in n; keep
  // those instances small so every check stays conclusive within budget.
  Site cap = p.mu * (1.0 + p.lambda) / p.lambda >= 2.0 ? 8 : 16;
  p.n = static_cast<Site>(2 + gen.below(static_cast<std::uint64_t>(cap - 1)));
  p.seed = gen.next();
  return p;
}

}  // namespace detail

inline VerifyReport verify_suite(const VerifyConfig& cfg = {}) {
  VerifyReport rep;
  auto add = [&rep](CheckResult c) {
    rep.all_pass = rep.all_pass && c.ok();
    rep.checks.push_back(std::move(c));
  };
  rng::Sequential gen(rng::stream_key(cfg.seed, rng::Stream::Policy));

  {
    CheckResult c{"abelian", 0, cfg.instances};
    for (std::size_t i = 0; i < cfg.instances; ++i) {
      Params p = detail::random_instance(gen);
      Policy other = i % 2 == 0 ? Policy::random(gen.next()) : Policy::sweep();
      if (check_abelian(p, Policy::leftmost(), other) == CheckOutcome::Pass)
        ++c.passed;
    }
    add(std::move(c));
  }
  {
    CheckResult c{"least-action", 0, cfg.instances};
    for (std::size_t i = 0; i < cfg.instances; ++i) {
      Params p = detail::random_instance(gen);
      std::uint64_t prefix = 1 + gen.below(2000);
      if (check_least_action(p, prefix) == CheckOutcome::Pass) ++c.passed;
    }
    add(std::move(c));
  }
  {
    CheckResult c{"sleep-monotonicity", 0, cfg.instances};
    for (std::size_t i = 0; i < cfg.instances; ++i) {
      Params p = detail::random_instance(gen);
      double fraction = 0.1 + 0.2 * static_cast<double>(gen.below(4));
      SleepMask mask = SleepMask::some(fraction, gen.next());
      if (check_sleep_monotonicity(p, mask) == CheckOutcome::Pass) ++c.passed;
    }
    add(std::move(c));
  }
  {
    // Monte Carlo means against the exact absorbing-chain solve, 4 standard
    // errors at 2 * 10^4 trials per case.
    struct Case {
      Site n;
      std::vector<Site> occupied;
      double lambda;
    };
    const Case cases[] = {
        {3, {0, 1}, 1.0}, {4, {0, 2}, 0.5}, {3, {1}, 2.0}};
    CheckResult c{"oracle-mc", 0, std::size(cases)};
    for (const Case& cs : cases) {
      Configuration init(cs.n);
      for (Site x : cs.occupied) init.add_active(x);
      OracleResult oracle = exact_expected_T(init, cs.lambda);
      const int trials = 20000;
      double sum = 0, sumsq = 0;
      for (int t = 0; t < trials; ++t) {
        std::uint64_t s = rng::mix64(cfg.seed + 0x0FAC1Eu + 977u * t);
        Outcome out = stabilize_from(init, InstructionStack(s, cs.lambda),
                                     Policy::random(s));
        double T = static_cast<double>(out.T);
        sum += T;
        sumsq += T * T;
      }
      double mean = sum / trials;
      double var = (sumsq - sum * sum / trials) / (trials - 1);
      double se = std::sqrt(var / trials);
      if (std::abs(mean - oracle.expected_T_double) <= 4 * se) ++c.passed;
    }
    add(std::move(c));
  }
  {
    // T for a lone particle is Geometric(lambda/(1+lambda)); two-sided KS at
    // significance 10^-3 (critical value 1.9495 / sqrt(N)).
    const double lambdas[] = {0.1, 1.0, 10.0};
    CheckResult c{"lone-geometric", 0, std::size(lambdas)};
    const int trials = 100000;
    for (double lambda : lambdas) {
      std::vector<std::uint64_t> sample;
      sample.reserve(trials);
      for (int t = 0; t < trials; ++t) {
        std::uint64_t s = rng::mix64(cfg.seed + 0x10E0u + 131u * t);
        Configuration init(8);
        init.add_active(0);
        Outcome out = stabilize_from(std::move(init),
                                     InstructionStack(s, lambda));
        sample.push_back(out.T);
      }
      std::sort(sample.begin(), sample.end());
      double p = lambda / (1.0 + lambda);
      // Both CDFs are integer step functions, so the sup is over integer k.
      double d = 0;
      std::size_t at_most_k = 0;
      for (std::uint64_t k = 1; k <= sample.back(); ++k) {
        while (at_most_k < sample.size() && sample[at_most_k] <= k) ++at_most_k;
        double fhat = static_cast<double>(at_most_k) / trials;
        double f = 1.0 - std::pow(1.0 - p, static_cast<double>(k));
        d = std::max(d, std::abs(fhat - f));
      }
      if (d <= 1.9495 / std::sqrt(static_cast<double>(trials))) ++c.passed;
    }
    add(std::move(c));
  }
  {
    // Gap between a barrier hit and the designated trap is dominated by a
    // Geometric(lambda/(1+lambda)) law; at lambda = 1 the mean is <= 2.2.
    CheckResult c{"trap-gap", 0, 1};
    double total = 0;
    int runs = 0;
    bool all_ok = true;
    for (std::uint64_t s = 1; s <= 500; ++s) {
      TrapPlan plan = run_trap_plan(cfg.seed * 1000003u + s, 1.0, 200, 1);
      if (!plan.success) {
        all_ok = false;
        break;
      }
      total += static_cast<double>(plan.advance[0]);
      ++runs;
    }
    if (all_ok && runs > 0 && total / runs <= 2.2) c.passed = 1;
    add(std::move(c));
  }
  {
    // A loop run that reaches all-asleep is a complete legal toppling
    // sequence, so its attempt count must equal the engine's exactly.
    CheckResult c{"loop-vs-engine", 0, 0};
    for (Site n : {4, 6, 8}) {
      for (std::uint64_t s = 1; s <= 10; ++s) {
        ++c.total;
        Params p{n, 0.5, 1.0, rng::mix64(cfg.seed + 59u * s + n)};
        LoopReport loop = run_loop(p);
        if (loop.termination != LoopReport::Termination::AllAsleep) continue;
        Outcome eng = stabilize(p);
        if (eng.status == Status::Stabilized && loop.T == eng.T) ++c.passed;
      }
    }
    add(std::move(c));
  }
  return rep;
}

}  // namespace arw
