#pragma once

// Command-line driver.
//
// Subcommands: run | sweep | verify | scheme | loop | oracle.
// Data subcommands emit trial records as CSV (default) or JSON lines, to
// standard output or --out; per-cell summaries go to standard error so the
// data stream stays parseable.  Exit codes: 0 success, 1 usage or I/O error,
// 2 verification-suite failure.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "core.hpp"
#include "experiments.hpp"
#include "oracle.hpp"
#include "records.hpp"

namespace arw::cli {

namespace detail {

inline Policy parse_policy(const std::string& name, std::uint64_t seed) {
  if (name == "leftmost") return Policy::leftmost();
  if (name == "sweep") return Policy::sweep();
  return Policy::random(seed);
}

struct Sink {
  std::ofstream file;
  std::ostream* os = nullptr;

  // Empty path = standard output.
  int open(const std::string& path) {
    if (path.empty()) {
      os = &std::cout;
      return 0;
    }
    file.open(path, std::ios::binary);
    if (!file) {
      std::cerr << "error: cannot open " << path << " for writing\n";
      return 1;
    }
    os = &file;
    return 0;
  }
};

inline void print_cell_summaries(const std::vector<CellSpec>& cells,
                                 const std::vector<TrialRecord>& records) {
  std::size_t offset = 0;
  for (const CellSpec& cell : cells) {
    std::vector<TrialRecord> slice(records.begin() + offset,
                                   records.begin() + offset + cell.trials);
    offset += cell.trials;
    CellStats s = summarize(slice);
    std::cerr << "# cell n=" << s.n << " mu=" << s.mu << " lambda=" << s.lambda
              << " scheme=" << scheme_name(cell.scheme) << " trials=" << s.trials
              << " censored=" << s.censored << " median_T=" << s.median_T
              << " p95_T=" << s.p95_T << '\n';
  }
}

inline int emit(const std::vector<CellSpec>& cells, std::uint64_t master,
                const std::string& format, const std::string& out_path) {
  for (const CellSpec& cell : cells) {
    if (cell.scheme == Scheme::Loop && cell.n % 2 != 0) {
      std::cerr << "error: the loop scheme needs an even n (got " << cell.n
                << ")\n";
      return 1;
    }
    Params p{static_cast<Site>(cell.n), cell.mu, cell.lambda, 1};
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  std::vector<TrialRecord> records = run_cells(cells, master);
  Sink sink;
  if (int rc = sink.open(out_path)) return rc;
  write_records(records, format, *sink.os);
  sink.os->flush();
  if (!*sink.os) {
    std::cerr << "error: write failed\n";
    return 1;
  }
  print_cell_summaries(cells, records);
  return 0;
}

// One grid cell per line, JSON, same field names as the sweep flags:
// {"n":256,"mu":0.3,"lambda":2.0,"trials":50,"scheme":"direct",
//  "budget":...,"c0":...,"max_rounds":...}; missing fields take the
// flag defaults of the invoking sweep.
inline std::vector<CellSpec> cells_from_grid_file(const std::string& path,
                                                  const CellSpec& defaults) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file " + path);
  std::vector<CellSpec> cells;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CellSpec cell = defaults;
    cell.n = j.at("n").get<std::uint32_t>();
    cell.mu = j.at("mu").get<double>();
    cell.lambda = j.at("lambda").get<double>();
    if (j.contains("trials")) cell.trials = j["trials"].get<std::uint32_t>();
    if (j.contains("scheme")) {
      auto s = parse_scheme(j["scheme"].get<std::string>());
      if (!s)
        throw std::runtime_error("grid file line " + std::to_string(lineno) +
                                 ": unknown scheme");
      cell.scheme = *s;
    }
    if (j.contains("budget")) cell.opts.budget = j["budget"].get<std::uint64_t>();
    if (j.contains("c0")) cell.opts.c0 = j["c0"].get<double>();
    if (j.contains("max_rounds"))
      cell.opts.max_rounds = j["max_rounds"].get<std::uint64_t>();
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Activated random walk on the cycle: simulator and experiments",
               "arw"};
  app.require_subcommand(1);

  std::string format = "csv";
  std::string out_path;
  std::uint64_t seed = 1;
  std::uint64_t budget = kDefaultBudget;

  // run: direct engine trials at one parameter point.
  auto* cmd_run = app.add_subcommand("run", "Stabilize trials at one cell");
  std::uint32_t run_n = 64;
  double run_mu = 0.5, run_lambda = 1.0;
  std::uint32_t trials = 1;
  std::string policy_name = "random";
  for (CLI::App* c : {cmd_run}) {
    c->add_option("--n", run_n, "Cycle size")->capture_default_str();
    c->add_option("--mu", run_mu, "Initial density")->capture_default_str();
    c->add_option("--lambda", run_lambda, "Sleep rate")->capture_default_str();
  }
  cmd_run->add_option("--policy", policy_name, "Toppling policy")
      ->check(CLI::IsMember({"leftmost", "random", "sweep"}))
      ->capture_default_str();

  // sweep: Cartesian grid, any scheme.
  auto* cmd_sweep = app.add_subcommand("sweep", "Run a parameter grid");
  std::vector<std::uint32_t> grid_ns;
  std::vector<double> grid_mus{0.5};
  std::vector<double> grid_lambdas{1.0};
  std::string scheme_name_arg = "direct";
  std::string grid_file;
  double c0 = 10.0;
  std::uint64_t max_rounds = 1'000'000;
  cmd_sweep->add_option("--n", grid_ns, "Cycle sizes, comma separated")
      ->delimiter(',');
  cmd_sweep->add_option("--mu", grid_mus, "Densities, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd_sweep->add_option("--lambda", grid_lambdas, "Sleep rates, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  cmd_sweep->add_option("--scheme", scheme_name_arg, "Trial scheme")
      ->check(CLI::IsMember({"direct", "subcritical", "loop", "pointmass"}))
      ->capture_default_str();
  cmd_sweep->add_option("--grid-file", grid_file,
                        "JSON-lines grid, one cell per line");

  // verify: invariant suite.
  auto* cmd_verify = app.add_subcommand("verify", "Run the verification suite");
  std::size_t instances = 100;
  cmd_verify->add_option("--instances", instances, "Instances per check")
      ->capture_default_str();

  // scheme: the two-phase trap construction.
  auto* cmd_scheme =
      app.add_subcommand("scheme", "Run the two-phase trap scheme");
  std::uint32_t scheme_n = 256;
  double scheme_mu = 0.15, scheme_lambda = 2.0;
  cmd_scheme->add_option("--n", scheme_n, "Cycle size")->capture_default_str();
  cmd_scheme->add_option("--mu", scheme_mu, "Initial density")
      ->capture_default_str();
  cmd_scheme->add_option("--lambda", scheme_lambda, "Sleep rate")
      ->capture_default_str();

  // loop: the pole-to-pole round scheme.
  auto* cmd_loop = app.add_subcommand("loop", "Run the pole-to-pole loop");
  std::uint32_t loop_n = 64;
  double loop_mu = 0.9, loop_lambda = 0.005;
  cmd_loop->add_option("--n", loop_n, "Cycle size, even")->capture_default_str();
  cmd_loop->add_option("--mu", loop_mu, "Initial density")->capture_default_str();
  cmd_loop->add_option("--lambda", loop_lambda, "Sleep rate")
      ->capture_default_str();

  // oracle: exact expected T for one small configuration.
  auto* cmd_oracle =
      app.add_subcommand("oracle", "Exact expected T for a small instance");
  std::uint32_t oracle_n = 3;
  double oracle_lambda = 1.0;
  std::vector<std::int64_t> occupied;
  cmd_oracle->add_option("--n", oracle_n, "Cycle size")->capture_default_str();
  cmd_oracle->add_option("--lambda", oracle_lambda, "Sleep rate")
      ->capture_default_str();
  cmd_oracle
      ->add_option("--occupied", occupied,
                   "Initially active sites, comma separated, repeats stack")
      ->delimiter(',');

  for (CLI::App* c : {cmd_run, cmd_sweep, cmd_scheme, cmd_loop}) {
    c->add_option("--seed", seed, "Master seed")->capture_default_str();
    c->add_option("--trials", trials, "Trials per cell")->capture_default_str();
    c->add_option("--budget", budget, "Attempt budget per trial")
        ->capture_default_str();
    c->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"csv", "jsonl"}))
        ->capture_default_str();
    c->add_option("--out", out_path, "Output path, default standard output");
  }
  for (CLI::App* c : {cmd_sweep, cmd_scheme}) {
    c->add_option("--c0", c0, "Gathering interval scale")->capture_default_str();
  }
  for (CLI::App* c : {cmd_sweep, cmd_loop}) {
    c->add_option("--max-rounds", max_rounds, "Loop round cap")
        ->capture_default_str();
  }
  cmd_verify->add_option("--seed", seed, "Master seed")->capture_default_str();

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("arw");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunOptions opts;
    opts.budget = budget;
    opts.max_rounds = max_rounds;
    opts.c0 = c0;

    if (cmd_run->parsed()) {
      opts.policy = detail::parse_policy(policy_name, seed);
      CellSpec cell{run_n, run_mu, run_lambda, Scheme::Direct, trials, opts};
      return detail::emit({cell}, seed, format, out_path);
    }
    if (cmd_sweep->parsed()) {
      Scheme scheme = *parse_scheme(scheme_name_arg);
      std::vector<CellSpec> cells;
      if (!grid_file.empty()) {
        CellSpec defaults{0, 0, 0, scheme, trials, opts};
        cells = detail::cells_from_grid_file(grid_file, defaults);
      } else {
        if (grid_ns.empty()) {
          std::cerr << "error: sweep needs --n or --grid-file\n";
          return 1;
        }
        SweepGrid grid{grid_ns, grid_mus, grid_lambdas, trials, scheme, opts};
        cells = expand(grid);
      }
      return detail::emit(cells, seed, format, out_path);
    }
    if (cmd_verify->parsed()) {
      VerifyReport rep = verify_suite({instances, seed});
      for (const CheckResult& c : rep.checks)
        std::cout << c.name << ": " << c.passed << "/" << c.total
                  << (c.ok() ? " pass" : " FAIL") << '\n';
      std::cout << "verify: " << (rep.all_pass ? "PASS" : "FAIL") << '\n';
      return rep.all_pass ? 0 : 2;
    }
    if (cmd_scheme->parsed()) {
      CellSpec cell{scheme_n, scheme_mu, scheme_lambda, Scheme::Subcritical,
                    trials, opts};
      return detail::emit({cell}, seed, format, out_path);
    }
    if (cmd_loop->parsed()) {
      CellSpec cell{loop_n, loop_mu, loop_lambda, Scheme::Loop, trials, opts};
      return detail::emit({cell}, seed, format, out_path);
    }
    if (cmd_oracle->parsed()) {
      Configuration init(static_cast<Site>(oracle_n));
      for (std::int64_t x : occupied) {
        if (x < 0 || x >= static_cast<std::int64_t>(oracle_n)) {
          std::cerr << "error: occupied site " << x << " outside [0, "
                    << oracle_n << ")\n";
          return 1;
        }
        init.add_active(static_cast<Site>(x));
      }
      OracleResult res = exact_expected_T(init, oracle_lambda);
      char buf[64];
      auto conv = std::to_chars(buf, buf + sizeof(buf), res.expected_T_double);
      std::cout << "n=" << oracle_n << " lambda=" << oracle_lambda
                << " particles=" << occupied.size() << " expected_T="
                << boost::multiprecision::numerator(res.expected_T) << "/"
                << boost::multiprecision::denominator(res.expected_T)
                << " expected_T_float=" << std::string(buf, conv.ptr)
                << " states=" << res.state_count << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

inline int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace arw::cli
