#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "arw/engine.hpp"
#include "arw/oracle.hpp"

using namespace arw;

namespace {

// Monte Carlo mean/SE of T from a fixed initial configuration.
std::pair<double, double> mc_mean_T(const Configuration& c, double lambda, int trials,
                                    std::uint64_t seed0) {
  double sum = 0, sq = 0;
  for (int t = 0; t < trials; ++t) {
    Outcome o = stabilize_from(c, InstructionStack(seed0 + t, lambda));
    REQUIRE(o.status == Status::Stabilized);
    double v = static_cast<double>(o.T);
    sum += v;
    sq += v * v;
  }
  double mean = sum / trials;
  double var = (sq - trials * mean * mean) / (trials - 1);
  return {mean, std::sqrt(var / trials)};
}

}  // namespace

TEST_CASE("lone particle closed form") {
  for (double lambda : {0.25, 0.5, 1.0, 4.0}) {
    OracleResult r = exact_expected_T(Configuration::point_mass(3, 1, 1), lambda);
    REQUIRE(r.expected_T == lone_particle_expected_T(lambda));
  }
  // Independent of the cycle size and starting site.
  REQUIRE(exact_expected_T(Configuration::point_mass(4, 1, 2), 1.0).expected_T ==
          Rational(2));
  REQUIRE(exact_expected_T(Configuration::point_mass(7, 1, 0), 1.0).expected_T ==
          Rational(2));
}

TEST_CASE("two particles on two sites, lambda = 1: hand-computed value") {
  // Three transient states: stacked (2,0), spread (1,1), one asleep with an
  // active neighbor (s,1).  With lambda = 1 an attempt sleeps w.p. 1/2 and
  // jumps w.p. 1/4 each way; on the 2-cycle both jumps land on the other
  // site.  E_stacked = 1 + E_stacked/2 + E_spread/2, E_spread = 1 +
  // E_asleep/2 + E_stacked/2, E_asleep = 1 + E_stacked/2, which solves to
  // E_stacked = 14, E_spread = 12.
  Configuration both = Configuration::point_mass(2, 2, 0);
  REQUIRE(exact_expected_T(both, 1.0).expected_T == Rational(14));

  Configuration spread(2);
  spread.add_active(0);
  spread.add_active(1);
  REQUIRE(exact_expected_T(spread, 1.0).expected_T == Rational(12));
}

TEST_CASE("oracle rejects overfull and oversized inputs") {
  REQUIRE_THROWS_AS(exact_expected_T(Configuration::point_mass(3, 4, 0), 1.0),
                    NoAbsorption);
  REQUIRE_THROWS_AS(exact_expected_T(Configuration::point_mass(12, 12, 0), 1.0, 500),
                    StateSpaceTooLarge);
}

TEST_CASE("oracle matches Monte Carlo on small instances") {
  // A representative subset of the exhaustive n <= 4 sweep in the acceptance
  // suite; full coverage lives there.
  struct Case { Site n; std::vector<Site> at; double lambda; };
  std::vector<Case> cases = {
      {2, {0, 0}, 1.0}, {3, {0, 1}, 0.5}, {4, {0, 2}, 2.0}, {4, {1, 1}, 0.5},
      {3, {2}, 2.0},    {4, {3}, 0.5},
  };
  int idx = 0;
  for (const Case& k : cases) {
    Configuration c(k.n);
    for (Site x : k.at) c.add_active(x);
    OracleResult ex = exact_expected_T(c, k.lambda);
    auto [mean, se] = mc_mean_T(c, k.lambda, 20'000, 50'000 + 1000 * idx++);
    INFO("n=" << k.n << " lambda=" << k.lambda << " exact=" << ex.expected_T_double
              << " mc=" << mean << " se=" << se);
    REQUIRE(std::abs(mean - ex.expected_T_double) < 4 * se);
  }
}

TEST_CASE("oracle expected value grows with added particles") {
  // Monotonicity sanity at n = 4, lambda = 1: more particles, more attempts.
  double one = exact_expected_T(Configuration::point_mass(4, 1, 0), 1.0).expected_T_double;
  double two = exact_expected_T(Configuration::point_mass(4, 2, 0), 1.0).expected_T_double;
  double three =
      exact_expected_T(Configuration::point_mass(4, 3, 0), 1.0).expected_T_double;
  REQUIRE(one < two);
  REQUIRE(two < three);
}
