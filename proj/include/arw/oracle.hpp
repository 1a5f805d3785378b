#pragma once

// Exact expected fixation time for small instances, by enumerating the
// absorbing Markov chain of the discrete dynamics and solving (I - P) E = 1
// in exact rational arithmetic.  The chain picks an active particle uniformly
// at random; each attempt is one unit of T.  This is deliberately slow and
// exists to validate the simulator, not to scale.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <stdexcept>
#include <vector>

#include "arw/core.hpp"

namespace arw {

using Rational = boost::multiprecision::cpp_rational;

struct StateSpaceTooLarge : std::runtime_error {
  explicit StateSpaceTooLarge(std::size_t count)
      : std::runtime_error("state space exceeds cap: " + std::to_string(count)) {}
};

struct NoAbsorption : std::runtime_error {
  NoAbsorption() : std::runtime_error("more particles than sites: chain cannot absorb") {}
};

struct OracleResult {
  Rational expected_T;
  double expected_T_double = 0.0;
  std::size_t state_count = 0;
};

namespace detail {

// Site encoding: -1 sleeper, k >= 0 actives.
using ChainState = std::vector<std::int32_t>;

inline ChainState encode(const Configuration& c) {
  ChainState s(static_cast<std::size_t>(c.n()));
  for (Site x = 0; x < c.n(); ++x)
    s[static_cast<std::size_t>(x)] =
        c.sleepy_at(x) ? -1 : static_cast<std::int32_t>(c.active_at(x));
  return s;
}

inline std::int64_t active_total(const ChainState& s) {
  std::int64_t a = 0;
  for (std::int32_t v : s) a += v > 0 ? v : 0;
  return a;
}

// Active arrival wakes a sleeper: -1 turns into 2 on arrival.
inline void add_active(ChainState& s, std::size_t x) {
  s[x] = s[x] == -1 ? 2 : s[x] + 1;
}

}  // namespace detail

// Expected total attempts to absorption from `initial`, exact in the rational
// field generated by lambda (converted exactly from its double value).
inline OracleResult exact_expected_T(const Configuration& initial, double lambda,
                                     std::size_t state_cap = 1'000'000) {
  using detail::ChainState;
  const std::size_t n = static_cast<std::size_t>(initial.n());
  if (initial.particle_total() > initial.n()) throw NoAbsorption();
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");

  const Rational lam(lambda);              // exact binary value of the double
  const Rational p_sleep = lam / (1 + lam);
  const Rational p_jump = Rational(1) / (2 * (1 + lam));

  // Breadth-first enumeration of reachable states.
  std::map<ChainState, std::size_t> index;
  std::vector<ChainState> states;
  std::deque<std::size_t> frontier;
  auto intern = [&](const ChainState& s) {
    auto [it, fresh] = index.try_emplace(s, states.size());
    if (fresh) {
      states.push_back(s);
      if (states.size() > state_cap) throw StateSpaceTooLarge(states.size());
      frontier.push_back(it->second);
    }
    return it->second;
  };

  ChainState root = detail::encode(initial);
  intern(root);

  // transitions[i] = list of (state, probability); absorbing rows stay empty.
  std::vector<std::vector<std::pair<std::size_t, Rational>>> transitions;
  transitions.reserve(256);
  while (!frontier.empty()) {
    std::size_t i = frontier.front();
    frontier.pop_front();
    ChainState s = states[i];
    if (transitions.size() <= i) transitions.resize(i + 1);
    std::int64_t act = detail::active_total(s);
    if (act == 0) continue;  // absorbing
    std::map<std::size_t, Rational> row;
    for (std::size_t x = 0; x < n; ++x) {
      if (s[x] <= 0) continue;
      Rational pick(s[x], act);  // particle chosen uniformly among actives
      // Jump left / right.
      for (int dir : {-1, +1}) {
        ChainState t = s;
        t[x] -= 1;
        detail::add_active(t, (x + n + static_cast<std::size_t>(dir)) % n);
        row[intern(t)] += pick * p_jump;
      }
      // Sleep attempt: succeeds only when the particle is alone.
      ChainState t = s;
      if (s[x] == 1) t[x] = -1;
      row[intern(t)] += pick * p_sleep;
    }
    transitions[i].assign(row.begin(), row.end());
  }
  transitions.resize(states.size());

  const std::size_t m = states.size();

  // Solve (I - P) E = 1 restricted to transient states by dense elimination.
  std::vector<std::size_t> transient;
  std::vector<std::ptrdiff_t> col(m, -1);
  for (std::size_t i = 0; i < m; ++i) {
    if (detail::active_total(states[i]) > 0) {
      col[i] = static_cast<std::ptrdiff_t>(transient.size());
      transient.push_back(i);
    }
  }
  const std::size_t t = transient.size();
  OracleResult res;
  res.state_count = m;
  if (t == 0) {
    res.expected_T = 0;
    res.expected_T_double = 0.0;
    return res;
  }

  std::vector<std::vector<Rational>> a(t, std::vector<Rational>(t + 1, Rational(0)));
  for (std::size_t r = 0; r < t; ++r) {
    a[r][static_cast<std::size_t>(col[transient[r]])] = 1;
    for (const auto& [dst, prob] : transitions[transient[r]]) {
      if (col[dst] >= 0) a[r][static_cast<std::size_t>(col[dst])] -= prob;
    }
    a[r][t] = 1;  // one attempt per step
  }
  for (std::size_t k = 0; k < t; ++k) {
    std::size_t piv = k;
    while (piv < t && a[piv][k] == 0) ++piv;
    if (piv == t) throw std::logic_error("oracle: singular system");
    std::swap(a[k], a[piv]);
    for (std::size_t r = 0; r < t; ++r) {
      if (r == k || a[r][k] == 0) continue;
      Rational f = a[r][k] / a[k][k];
      for (std::size_t cidx = k; cidx <= t; ++cidx) a[r][cidx] -= f * a[k][cidx];
    }
  }
  std::ptrdiff_t root_col = col[index.at(root)];
  if (root_col < 0) {
    res.expected_T = 0;
  } else {
    std::size_t rc = static_cast<std::size_t>(root_col);
    res.expected_T = a[rc][t] / a[rc][rc];
  }
  res.expected_T_double = static_cast<double>(res.expected_T);
  return res;
}

// Closed form for one particle on any cycle: T ~ Geometric(lambda/(1+lambda)),
// so E[T] = (1+lambda)/lambda.  Cheap cross-check for the chain solver.
inline Rational lone_particle_expected_T(double lambda) {
  Rational lam(lambda);
  return (1 + lam) / lam;
}

}  // namespace arw
