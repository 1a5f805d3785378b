#pragma once

// Trial records and their CSV / JSON-lines serialization.
//
// One TrialRecord describes one simulation trial: the cell parameters, the
// scheme that produced it, the attempt count T, and whether T is exact
// (absorption reached) or a budget-capped lower bound.  Serialization is
// locale-independent; floating-point fields use the shortest representation
// that round-trips exactly, so parsing an emitted file recovers every
// numeric field bit for bit.

#include <charconv>
#include <concepts>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace arw {

enum class Scheme { Direct, Subcritical, Loop, PointMass };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Direct: return "direct";
    case Scheme::Subcritical: return "subcritical";
    case Scheme::Loop: return "loop";
    case Scheme::PointMass: return "pointmass";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(std::string_view s) {
  if (s == "direct") return Scheme::Direct;
  if (s == "subcritical") return Scheme::Subcritical;
  if (s == "loop") return Scheme::Loop;
  if (s == "pointmass") return Scheme::PointMass;
  return std::nullopt;
}

// Fixed: T counts every attempt through absorption.
// Censored: the run was cut off (budget, round cap, or a scheme that did not
// finish); T is a lower bound on the true attempt count.
enum class TrialOutcome { Fixed, Censored };

inline const char* outcome_name(TrialOutcome o) {
  return o == TrialOutcome::Fixed ? "fixed" : "censored";
}

inline std::optional<TrialOutcome> parse_outcome(std::string_view s) {
  if (s == "fixed") return TrialOutcome::Fixed;
  if (s == "censored") return TrialOutcome::Censored;
  return std::nullopt;
}

struct TrialRecord {
  std::uint32_t n = 0;
  double mu = 0.0;
  double lambda = 0.0;
  std::uint64_t seed = 0;  // master seed; per-trial seeds are derived
  std::uint32_t trial = 0;
  Scheme scheme = Scheme::Direct;
  std::uint64_t T = 0;
  TrialOutcome outcome = TrialOutcome::Fixed;
  std::uint64_t sleepers = 0;
  std::optional<std::uint64_t> rounds;  // loop runs only
  std::uint64_t wall_ms = 0;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

inline constexpr std::string_view kCsvHeader =
    "n,mu,lambda,seed,trial,scheme,T,outcome,sleepers,rounds,wall_ms";

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

template <std::integral Int>
inline void append_number(std::string& out, Int v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

template <typename T>
inline T parse_number(std::string_view field, const char* what) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw std::runtime_error(std::string("bad numeric field for ") + what);
  return value;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

}  // namespace detail

inline std::string to_csv_row(const TrialRecord& r) {
  std::string line;
  line.reserve(96);
  detail::append_number(line, r.n);
  line.push_back(',');
  detail::append_number(line, r.mu);
  line.push_back(',');
  detail::append_number(line, r.lambda);
  line.push_back(',');
  detail::append_number(line, r.seed);
  line.push_back(',');
  detail::append_number(line, r.trial);
  line.push_back(',');
  line.append(scheme_name(r.scheme));
  line.push_back(',');
  detail::append_number(line, r.T);
  line.push_back(',');
  line.append(outcome_name(r.outcome));
  line.push_back(',');
  detail::append_number(line, r.sleepers);
  line.push_back(',');
  if (r.rounds) detail::append_number(line, *r.rounds);
  line.push_back(',');
  detail::append_number(line, r.wall_ms);
  return line;
}

inline void write_csv(const std::vector<TrialRecord>& records, std::ostream& os) {
  os << kCsvHeader << '\n';
  for (const TrialRecord& r : records) os << to_csv_row(r) << '\n';
}

inline nlohmann::ordered_json to_json(const TrialRecord& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["mu"] = r.mu;
  j["lambda"] = r.lambda;
  j["seed"] = r.seed;
  j["trial"] = r.trial;
  j["scheme"] = scheme_name(r.scheme);
  j["T"] = r.T;
  j["outcome"] = outcome_name(r.outcome);
  j["sleepers"] = r.sleepers;
  if (r.rounds)
    j["rounds"] = *r.rounds;
  else
    j["rounds"] = nullptr;
  j["wall_ms"] = r.wall_ms;
  return j;
}

inline void write_jsonl(const std::vector<TrialRecord>& records, std::ostream& os) {
  for (const TrialRecord& r : records) os << to_json(r).dump() << '\n';
}

inline void write_records(const std::vector<TrialRecord>& records,
                          std::string_view format, std::ostream& os) {
  if (format == "csv") {
    write_csv(records, os);
  } else if (format == "jsonl") {
    write_jsonl(records, os);
  } else {
    throw std::invalid_argument("format must be csv or jsonl");
  }
}

inline TrialRecord parse_csv_row(std::string_view line) {
  auto f = detail::split_fields(line);
  if (f.size() != 11) throw std::runtime_error("csv row must have 11 fields");
  TrialRecord r;
  r.n = detail::parse_number<std::uint32_t>(f[0], "n");
  r.mu = detail::parse_number<double>(f[1], "mu");
  r.lambda = detail::parse_number<double>(f[2], "lambda");
  r.seed = detail::parse_number<std::uint64_t>(f[3], "seed");
  r.trial = detail::parse_number<std::uint32_t>(f[4], "trial");
  auto scheme = parse_scheme(f[5]);
  if (!scheme) throw std::runtime_error("unknown scheme name");
  r.scheme = *scheme;
  r.T = detail::parse_number<std::uint64_t>(f[6], "T");
  auto outcome = parse_outcome(f[7]);
  if (!outcome) throw std::runtime_error("unknown outcome name");
  r.outcome = *outcome;
  r.sleepers = detail::parse_number<std::uint64_t>(f[8], "sleepers");
  if (!f[9].empty()) r.rounds = detail::parse_number<std::uint64_t>(f[9], "rounds");
  r.wall_ms = detail::parse_number<std::uint64_t>(f[10], "wall_ms");
  return r;
}

inline std::vector<TrialRecord> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty csv input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw std::runtime_error("unexpected csv header");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out.push_back(parse_csv_row(line));
  }
  return out;
}

}  // namespace arw
