#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include <arw/experiments.hpp>
#include <arw/oracle.hpp>

using namespace arw;

namespace {

TrialRecord sample_record() {
  TrialRecord r;
  r.n = 1024;
  r.mu = 0.2;
  r.lambda = 1.0 / 3.0;
  r.seed = 7;
  r.trial = 3;
  r.scheme = Scheme::Direct;
  r.T = 123456789012345ULL;
  r.outcome = TrialOutcome::Fixed;
  r.sleepers = 204;
  r.wall_ms = 12;
  return r;
}

std::vector<TrialRecord> strip_wall(std::vector<TrialRecord> rs) {
  for (TrialRecord& r : rs) r.wall_ms = 0;
  return rs;
}

}  // namespace

TEST_CASE("csv header is pinned") {
  REQUIRE(kCsvHeader ==
          "n,mu,lambda,seed,trial,scheme,T,outcome,sleepers,rounds,wall_ms");
  std::ostringstream os;
  write_csv({}, os);
  REQUIRE(os.str() == std::string(kCsvHeader) + "\n");
}

TEST_CASE("csv rows round-trip every numeric field exactly") {
  TrialRecord a = sample_record();
  TrialRecord b = sample_record();
  b.mu = 0.1;  // not representable exactly in binary; round-trip must still hold
  b.lambda = 1e-9;
  b.scheme = Scheme::Loop;
  b.outcome = TrialOutcome::Censored;
  b.rounds = 42;
  b.T = ~0ULL;

  std::ostringstream os;
  write_csv({a, b}, os);
  std::istringstream is(os.str());
  std::vector<TrialRecord> back = read_csv(is);
  REQUIRE(back.size() == 2);
  REQUIRE(back[0] == a);
  REQUIRE(back[1] == b);
}

TEST_CASE("rounds column is empty for non-loop schemes and set for loop") {
  TrialRecord direct = sample_record();
  TrialRecord loop = sample_record();
  loop.scheme = Scheme::Loop;
  loop.outcome = TrialOutcome::Censored;
  loop.rounds = 9;
  std::ostringstream os;
  write_csv({direct, loop}, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);  // header
  std::getline(is, line);
  REQUIRE(line.find(",direct,") != std::string::npos);
  REQUIRE(line.find(",fixed,") != std::string::npos);
  REQUIRE(line.substr(line.size() - 4) == ",,12");  // empty rounds column
  std::getline(is, line);
  REQUIRE(line.find(",loop,") != std::string::npos);
  REQUIRE(line.find(",censored,") != std::string::npos);
  REQUIRE(line.find(",9,12") != std::string::npos);
}

TEST_CASE("jsonl mirrors the csv field names") {
  TrialRecord r = sample_record();
  std::ostringstream os;
  write_jsonl({r}, os);
  nlohmann::json j = nlohmann::json::parse(os.str());
  REQUIRE(j["n"] == 1024);
  REQUIRE(j["mu"] == 0.2);
  REQUIRE(j["seed"] == 7);
  REQUIRE(j["trial"] == 3);
  REQUIRE(j["scheme"] == "direct");
  REQUIRE(j["T"] == 123456789012345ULL);
  REQUIRE(j["outcome"] == "fixed");
  REQUIRE(j["sleepers"] == 204);
  REQUIRE(j["rounds"].is_null());
  REQUIRE(j["wall_ms"] == 12);
  REQUIRE(j["lambda"].get<double>() == 1.0 / 3.0);
}

TEST_CASE("malformed csv input is rejected") {
  std::istringstream bad_header("n,mu,lambda\n");
  REQUIRE_THROWS_AS(read_csv(bad_header), std::runtime_error);
  std::istringstream short_row(std::string(kCsvHeader) + "\n1,2,3\n");
  REQUIRE_THROWS_AS(read_csv(short_row), std::runtime_error);
  std::istringstream bad_scheme(std::string(kCsvHeader) +
                                "\n8,0.5,1,1,0,warp,5,fixed,4,,0\n");
  REQUIRE_THROWS_AS(read_csv(bad_scheme), std::runtime_error);
}

TEST_CASE("scheme and outcome names round-trip") {
  for (Scheme s : {Scheme::Direct, Scheme::Subcritical, Scheme::Loop,
                   Scheme::PointMass})
    REQUIRE(parse_scheme(scheme_name(s)) == s);
  REQUIRE(!parse_scheme("bogus").has_value());
  REQUIRE(parse_outcome("fixed") == TrialOutcome::Fixed);
  REQUIRE(parse_outcome("censored") == TrialOutcome::Censored);
}

TEST_CASE("trial seeds are distinct across cells and trials") {
  std::vector<std::uint64_t> seen;
  for (std::uint64_t cell = 0; cell < 20; ++cell)
    for (std::uint64_t trial = 0; trial < 20; ++trial)
      seen.push_back(trial_seed(99, cell, trial));
  std::sort(seen.begin(), seen.end());
  REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("run_trials is deterministic given the master seed") {
  Params p{64, 0.5, 1.0, 17};
  auto a = run_trials(p, 8, Scheme::Direct);
  auto b = run_trials(p, 8, Scheme::Direct);
  REQUIRE(a.size() == 8);
  REQUIRE(strip_wall(a) == strip_wall(b));  // wall_ms is the only nondeterminism
  for (std::uint32_t t = 0; t < 8; ++t) {
    REQUIRE(a[t].trial == t);
    REQUIRE(a[t].seed == 17);
  }
}

TEST_CASE("worker count does not change the records") {
  Params p{128, 0.4, 1.0, 5};
  setenv("ARW_THREADS", "1", 1);
  auto serial = run_trials(p, 12, Scheme::Direct);
  setenv("ARW_THREADS", "4", 1);
  auto parallel = run_trials(p, 12, Scheme::Direct);
  unsetenv("ARW_THREADS");
  REQUIRE(strip_wall(serial) == strip_wall(parallel));
}

TEST_CASE("a single trial reproduces one stabilize call") {
  Params p{96, 0.5, 2.0, 23};
  auto recs = run_trials(p, 1, Scheme::Direct);
  REQUIRE(recs.size() == 1);
  std::uint64_t derived = trial_seed(23, 0, 0);
  Outcome out = stabilize({96, 0.5, 2.0, derived}, Policy::random(derived));
  REQUIRE(recs[0].T == out.T);
  REQUIRE(recs[0].sleepers ==
          static_cast<std::uint64_t>(out.config.sleeper_total()));
  REQUIRE(recs[0].outcome == TrialOutcome::Fixed);
}

TEST_CASE("a one-cell grid matches run_trials") {
  SweepGrid g;
  g.ns = {48};
  g.mus = {0.5};
  g.lambdas = {1.5};
  g.trials = 5;
  auto from_grid = strip_wall(run_grid(g, 31));
  auto direct = strip_wall(run_trials({48, 0.5, 1.5, 31}, 5, Scheme::Direct));
  REQUIRE(from_grid == direct);
}

TEST_CASE("grid expansion order is n, mu, lambda with n slowest") {
  SweepGrid g;
  g.ns = {8, 16};
  g.mus = {0.2, 0.4};
  g.lambdas = {1.0, 2.0};
  auto cells = expand(g);
  REQUIRE(cells.size() == 8);
  REQUIRE(cells[0].n == 8);
  REQUIRE(cells[0].mu == 0.2);
  REQUIRE(cells[0].lambda == 1.0);
  REQUIRE(cells[1].lambda == 2.0);
  REQUIRE(cells[2].mu == 0.4);
  REQUIRE(cells[4].n == 16);
  REQUIRE(cells[7].n == 16);
  REQUIRE(cells[7].mu == 0.4);
  REQUIRE(cells[7].lambda == 2.0);
}

TEST_CASE("monte carlo trials agree with the exact oracle") {
  Configuration init(3);
  init.add_active(0);
  init.add_active(1);
  OracleResult oracle = exact_expected_T(init, 1.0);
  const int trials = 100000;
  double sum = 0, sumsq = 0;
  for (int t = 0; t < trials; ++t) {
    std::uint64_t s = rng::mix64(0xBEEF + 31 * t);
    Outcome out = stabilize_from(init, InstructionStack(s, 1.0), Policy::random(s));
    sum += static_cast<double>(out.T);
    sumsq += static_cast<double>(out.T) * static_cast<double>(out.T);
  }
  double mean = sum / trials;
  double se = std::sqrt((sumsq - sum * sum / trials) / (trials - 1) / trials);
  REQUIRE(std::abs(mean - oracle.expected_T_double) <= 4 * se);
}

TEST_CASE("censored trials report the budget exactly and are flagged") {
  auto recs = run_trials({32, 0.9, 0.005, 3}, 10, Scheme::Direct, {.budget = 50});
  for (const TrialRecord& r : recs) {
    REQUIRE(r.outcome == TrialOutcome::Censored);
    REQUIRE(r.T == 50);  // capped run consumed exactly the budget
  }
  CellStats s = summarize(recs);
  REQUIRE(s.censored == 10);
  REQUIRE(s.censored_fraction == 1.0);
  REQUIRE(s.too_censored);
  REQUIRE(s.median_T == 50);
}

TEST_CASE("lower median and p95 use the pinned index convention") {
  std::vector<std::uint64_t> ten{10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  REQUIRE(lower_median(ten) == 5);
  REQUIRE(percentile95(ten) == 10);
  std::vector<std::uint64_t> twenty;
  for (std::uint64_t i = 1; i <= 20; ++i) twenty.push_back(i);
  REQUIRE(lower_median(twenty) == 10);
  REQUIRE(percentile95(twenty) == 19);
  REQUIRE(lower_median({7}) == 7);
  REQUIRE(percentile95({7}) == 7);
}

TEST_CASE("loop records carry rounds; direct records do not") {
  auto loop = run_trials({16, 0.5, 1.0, 11}, 3, Scheme::Loop);
  for (const TrialRecord& r : loop) {
    REQUIRE(r.rounds.has_value());
    REQUIRE(r.outcome == TrialOutcome::Fixed);
  }
  auto direct = run_trials({16, 0.5, 1.0, 11}, 3, Scheme::Direct);
  for (const TrialRecord& r : direct) REQUIRE(!r.rounds.has_value());
}

TEST_CASE("an odd cycle under the loop scheme surfaces as an error") {
  REQUIRE_THROWS_AS(run_trials({15, 0.5, 1.0, 1}, 2, Scheme::Loop),
                    std::invalid_argument);
}

TEST_CASE("pointmass trials start from the origin pile") {
  auto recs = run_trials({64, 0.5, 1.0, 13}, 2, Scheme::PointMass);
  for (const TrialRecord& r : recs) {
    REQUIRE(r.outcome == TrialOutcome::Fixed);
    REQUIRE(r.sleepers == 32);  // floor(mu n) particles all end asleep
  }
}

TEST_CASE("a degenerate single-n grid yields a report with no trend flags") {
  SweepGrid g;
  g.ns = {128};
  g.mus = {0.3};
  g.lambdas = {2.0};
  g.trials = 5;
  ScalingReport rep = subcritical_scaling_report(g, 7);
  REQUIRE(rep.rows.size() == 1);
  REQUIRE(rep.ratios.empty());
  REQUIRE(!rep.violation);
  REQUIRE(!rep.regime_warning);
  REQUIRE(rep.rows[0].normalized > 0);
}

TEST_CASE("scaling report flags the wrong regime") {
  SweepGrid g;
  g.ns = {16};
  g.mus = {0.9};
  g.lambdas = {0.005};
  g.trials = 2;
  g.opts.budget = 1000;
  ScalingReport rep = subcritical_scaling_report(g, 7);
  REQUIRE(rep.regime_warning);  // 0.9 >= 0.005/1.005
}

TEST_CASE("scaling report normalizes by n ln^2 n and tracks octaves") {
  SweepGrid g;
  g.ns = {64, 128};
  g.mus = {0.3};
  g.lambdas = {2.0};
  g.trials = 20;
  ScalingReport rep = subcritical_scaling_report(g, 19);
  REQUIRE(rep.rows.size() == 2);
  REQUIRE(rep.ratios.size() == 1);
  double n0 = 64, n1 = 128;
  double expect0 = static_cast<double>(rep.rows[0].stats.median_T) /
                   (n0 * std::log(n0) * std::log(n0));
  double expect1 = static_cast<double>(rep.rows[1].stats.median_T) /
                   (n1 * std::log(n1) * std::log(n1));
  REQUIRE(rep.rows[0].normalized == Catch::Approx(expect0));
  REQUIRE(rep.ratios[0] == Catch::Approx(expect1 / expect0));
  REQUIRE(rep.violation == (rep.ratios[0] > 2.0));
}

TEST_CASE("growth report flags all-censored cells and skips them in the fit") {
  SweepGrid g;
  g.ns = {16, 24};
  g.mus = {0.9};
  g.lambdas = {0.005};
  g.trials = 4;
  g.opts.budget = 100;
  GrowthReport rep = supercritical_growth_report(g, 3);
  REQUIRE(rep.rows.size() == 2);
  for (const CellStats& s : rep.rows) {
    REQUIRE(s.too_censored);
    REQUIRE(s.censored_fraction == 1.0);
  }
  REQUIRE(rep.valid_rows == 0);
  REQUIRE(!rep.monotone_increasing);
  REQUIRE(rep.slope == 0.0);
}

TEST_CASE("growth report fits a positive slope on a feasible ladder") {
  SweepGrid g;
  g.ns = {8, 16, 32, 64};
  g.mus = {0.5};
  g.lambdas = {1.0};
  g.trials = 30;
  GrowthReport rep = supercritical_growth_report(g, 11);
  REQUIRE(rep.valid_rows == 4);
  REQUIRE(rep.monotone_increasing);
  REQUIRE(rep.slope > 0);
}

TEST_CASE("verify suite passes on its default configuration") {
  VerifyReport rep = verify_suite({30, 2});
  for (const CheckResult& c : rep.checks) {
    INFO(c.name << ": " << c.passed << "/" << c.total);
    REQUIRE(c.ok());
  }
  REQUIRE(rep.all_pass);
  REQUIRE(rep.checks.size() == 7);
}

TEST_CASE("a mask over a jump slot is flagged, not evaluated") {
  Params p{8, 0.5, 1.0, 41};
  InstructionStack stack(p.seed, p.lambda);
  Site x = 0;
  std::uint64_t jump_slot = 0;
  for (std::uint64_t j = 1; j < 64 && jump_slot == 0; ++j)
    if (stack.raw_at(x, j) != Instruction::Sleep) jump_slot = j;
  REQUIRE(jump_slot > 0);
  SleepMask bad = SleepMask::explicit_slots({{x, jump_slot}});
  REQUIRE(check_sleep_monotonicity(p, bad) == CheckOutcome::InvalidMask);
}
