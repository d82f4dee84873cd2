#pragma once

// Command implementations behind the infoevo executable. Each returns a
// process exit code: 0 success, 1 tolerance failure, 2 configuration error.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "infoevo/cli/config.hpp"
#include "infoevo/demes.hpp"
#include "infoevo/domains/bitstring.hpp"
#include "infoevo/domains/expr_tree.hpp"
#include "infoevo/domains/real_vector.hpp"
#include "infoevo/geodesic_search.hpp"
#include "infoevo/stats.hpp"

namespace infoevo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTolerance = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kTraceFields[] = {"mode", "eval_order", "score", "deme_id", "skipped_so_far"};

struct Context {
  std::filesystem::path out_dir = ".";
  std::size_t threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

/// Builds the configured problem and calls f with it.
template <class F>
decltype(auto) with_problem(const ProblemConfig& pc, F&& f) {
  try {
    if (pc.name == "onemax" || pc.name == "trap") {
      if (pc.target) throw ConfigError("problem.target", "bitstring targets are fixed at the optimum");
      if (pc.bits == 0) throw ConfigError("problem.bits", "must be positive");
      if (pc.name == "onemax") return f(domains::BitStringProblem::onemax(pc.bits));
      if (pc.block == 0 || pc.bits % pc.block != 0)
        throw ConfigError("problem.bits", "trap length must be a multiple of the block size");
      return f(domains::BitStringProblem::trap(pc.bits, pc.block));
    }
    if (pc.name == "sphere" || pc.name == "rosenbrock") {
      if (pc.dim == 0) throw ConfigError("problem.dim", "must be positive");
      const auto obj = pc.name == "sphere" ? domains::RealObjective::sphere : domains::RealObjective::rosenbrock;
      return f(domains::RealVectorProblem(obj, pc.dim, pc.target.value_or(-1e-3)));
    }
    if (pc.name == "symreg") {
      const auto data = pc.dataset.empty() ? domains::default_dataset() : domains::load_csv_dataset(pc.dataset);
      const auto metric = pc.behavior_metric == "fisher" ? domains::BehaviorMetric::fisher
                                                         : domains::BehaviorMetric::euclidean;
      return f(domains::SymbolicRegressionProblem(data, pc.max_depth, pc.target.value_or(-1e-12), metric));
    }
  } catch (const BadLength& e) {
    throw ConfigError("problem", e.what());
  }
  throw ConfigError("problem.name", "unknown problem '" + pc.name + "'");
}

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip decimal form of a double.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? end : buf);
}

/// RFC 4180 field: quoted when it holds a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) row += (i ? "," : "") + csv_field(fields[i]);
  return row + "\r\n";
}

inline json round_json(const DemeRoundReport& r) {
  json subs = json::array();
  for (const auto& s : r.round.subdemes)
    subs.push_back({{"ray_rank", s.ray_rank},
                    {"generations_run", s.generations_run},
                    {"offspring_produced", s.offspring_produced},
                    {"candidates_generated", s.candidates_generated},
                    {"candidates_skipped", s.candidates_skipped},
                    {"candidates_evaluated", s.candidates_evaluated},
                    {"stopped_early", s.stopped_early},
                    {"best_score", s.best_score}});
  const auto& q = r.round;
  return {{"deme_id", r.deme_id},
          {"round_index", q.round_index},
          {"rays_generated", q.rays_generated},
          {"rays_used", q.rays_used},
          {"candidates_generated", q.candidates_generated},
          {"candidates_skipped", q.candidates_skipped},
          {"candidates_evaluated", q.candidates_evaluated},
          {"best_score_before", q.best_score_before},
          {"best_score_after", q.best_score_after},
          {"gamma_used", q.gamma_used},
          {"chart_degenerate", q.chart_degenerate},
          {"subdemes", subs}};
}

// ---------------------------------------------------------------------------
// Running one mode

struct ModeOutcome {
  Mode mode = Mode::info_evo;
  std::uint64_t seed = 0;
  double best_score = 0.0;
  bool reached_target = false;
  std::size_t evaluations = 0;
  std::size_t evals_to_target = 0;  // budget when the target was not reached
  std::size_t candidates_skipped = 0;
  Trace trace;
  json record;
};

inline ModeOutcome execute_mode(const RunConfig& config, Mode mode, std::uint64_t seed, std::size_t threads) {
  return with_problem(config.problem, [&](const auto& problem) {
    LoopConfig loop = config.loop;
    loop.mode = mode;
    loop.evolution.seed = seed;
    loop.threads = threads;
    const DemeBudget budget{config.budget / config.demes, config.subdemes()};
    DemeOrchestrator orchestrator(problem, loop, config.demes, budget, config.budget);
    orchestrator.run();

    ModeOutcome o;
    o.mode = mode;
    o.seed = seed;
    o.trace = orchestrator.trace();
    o.evaluations = orchestrator.total_evaluations();
    o.candidates_skipped = o.trace.skipped;
    const auto target = problem.target();
    o.evals_to_target = config.budget;
    for (const auto& e : o.trace.entries)
      if (target && e.score >= *target) {
        o.evals_to_target = static_cast<std::size_t>(e.eval_order) + 1;
        o.reached_target = true;
        break;
      }

    const auto [d, i] = orchestrator.best();
    const auto& deme = orchestrator.deme(d);
    o.best_score = deme.ledger()[i].score;
    json rounds = json::array();
    for (const auto& r : orchestrator.reports()) rounds.push_back(round_json(r));
    json demes = json::array();
    for (std::size_t k = 0; k < orchestrator.size(); ++k) {
      const auto& dm = orchestrator.deme(k);
      demes.push_back({{"deme_id", dm.deme_id()},
                       {"feature_subset", dm.spec().feature_subset},
                       {"evaluations", dm.ledger().eval_count()},
                       {"stop_reason", stop_reason_name(dm.run().stop_reason())},
                       {"final_gamma", dm.run().gamma()}});
    }
    o.record = {{"mode", mode_name(mode)},
                {"seed", seed},
                {"best_score", o.best_score},
                {"best_genotype", deme.problem().render(deme.ledger()[i].genotype)},
                {"best_deme", deme.deme_id()},
                {"reached_target", o.reached_target},
                {"target", target ? json(*target) : json(nullptr)},
                {"evaluations", o.evaluations},
                {"evals_to_target", o.evals_to_target},
                {"candidates_skipped", o.candidates_skipped},
                {"demes", demes},
                {"rounds", rounds}};
    return o;
  });
}

inline std::vector<Mode> modes_of(RunMode m) {
  if (m == RunMode::info_evo) return {Mode::info_evo};
  if (m == RunMode::baseline) return {Mode::baseline};
  return {Mode::info_evo, Mode::baseline};
}

inline void write_trace(std::ostream& os, const std::vector<const ModeOutcome*>& runs) {
  json header = {{"schema", "infoevo.trace"}, {"version", 1}, {"fields", json::array()}};
  for (const char* f : kTraceFields) header["fields"].push_back(f);
  os << header.dump() << '\n';
  for (const auto* r : runs)
    for (const auto& e : r->trace.entries)
      os << json{{"mode", mode_name(r->mode)},
                 {"eval_order", e.eval_order},
                 {"score", e.score},
                 {"deme_id", e.deme_id},
                 {"skipped_so_far", e.skipped_so_far}}
                .dump()
         << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("out", "cannot write '" + path.string() + "'");
  return os;
}

// ---------------------------------------------------------------------------
// Commands

/// Runs the configured mode(s); writes run.json and trace.jsonl.
inline int cmd_run(const RunConfig& config, const Context& ctx) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ModeOutcome> outcomes;
  for (Mode m : modes_of(config.mode)) outcomes.push_back(execute_mode(config, m, config.seed_value(), ctx.threads));
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json runs = json::array();
  std::vector<const ModeOutcome*> ptrs;
  for (const auto& o : outcomes) {
    runs.push_back(o.record);
    ptrs.push_back(&o);
  }
  const json record = {{"schema", "infoevo.run"},
                       {"version", 1},
                       {"config", to_json(config)},
                       {"runs", runs},
                       {"wall_time_seconds", wall}};
  {
    auto os = open_output(ctx.out_dir / "run.json");
    os << record.dump(2) << '\n';
  }
  {
    auto os = open_output(ctx.out_dir / "trace.jsonl");
    write_trace(os, ptrs);
  }
  if (ctx.out)
    for (const auto& o : outcomes)
      *ctx.out << mode_name(o.mode) << ": best " << format_number(o.best_score) << " after "
               << o.evaluations << " evaluations" << (o.reached_target ? " (target reached)" : "") << '\n';
  return kExitOk;
}

inline const std::vector<std::string>& compare_columns() {
  static const std::vector<std::string> cols{"seed", "mode", "evals_to_target", "best_score",
                                             "candidates_skipped"};
  return cols;
}

/// Paired runs for seeds seed .. seed + repeats - 1; writes compare.csv with
/// one row per run followed by one median row per mode.
inline int cmd_compare(const RunConfig& config, std::size_t repeats, const Context& ctx) {
  config.validate();
  if (repeats == 0) throw ConfigError("repeats", "must be at least 1");
  const std::uint64_t seed = config.seed_value();
  std::vector<ModeOutcome> outcomes;
  for (std::size_t r = 0; r < repeats; ++r)
    for (Mode m : {Mode::info_evo, Mode::baseline}) outcomes.push_back(execute_mode(config, m, seed + r, ctx.threads));

  std::string csv = csv_row(compare_columns());
  for (const auto& o : outcomes)
    csv += csv_row({std::to_string(o.seed), mode_name(o.mode), std::to_string(o.evals_to_target),
                    format_number(o.best_score), std::to_string(o.candidates_skipped)});
  for (Mode m : {Mode::info_evo, Mode::baseline}) {
    std::vector<double> evals, best, skipped;
    for (const auto& o : outcomes) {
      if (o.mode != m) continue;
      evals.push_back(static_cast<double>(o.evals_to_target));
      best.push_back(o.best_score);
      skipped.push_back(static_cast<double>(o.candidates_skipped));
    }
    csv += csv_row({"median", mode_name(m), format_number(median(evals)), format_number(median(best)),
                    format_number(median(skipped))});
  }
  {
    auto os = open_output(ctx.out_dir / "compare.csv");
    os << csv;
  }
  if (ctx.out) *ctx.out << csv;
  return kExitOk;
}

struct GeodesicTrial {
  std::size_t n = 0;
  std::size_t index = 0;
  double exact = 0.0;
  double approx = 0.0;
  double relative_error() const { return exact > 0.0 ? std::abs(approx - exact) / exact : std::abs(approx); }
};

/// One oracle comparison: a random interior base distribution, a seeded chart
/// of dimension min(chart_dim, n - 1) inside the region where the chart is
/// isometric, and two random chart points. The Dijkstra + refinement length
/// is compared with the closed-form distance between the two points.
inline GeodesicTrial geodesic_trial(std::size_t n, std::size_t index, std::size_t resolution,
                                    std::size_t levels, std::size_t chart_dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, n, index));
  std::vector<double> w(n);
  for (auto& x : w) x = 0.2 + uniform01(rng);
  const LogDistribution base = from_weights(w);
  const PromiseVector promise{gaussian_vector(rng, n)};
  const std::size_t d = std::min(chart_dim, n - 1);
  Chart chart = build_chart(base, promise, d, 1.0, derive_seed(seed, n, index, 1));
  chart.radius = std::min(1.0, 0.95 * chart.safe_radius());
  auto random_point = [&] {
    std::vector<double> c(d);
    double r2 = 0.0;
    do {
      r2 = 0.0;
      for (auto& x : c) {
        x = (2.0 * uniform01(rng) - 1.0) * chart.radius;
        r2 += x * x;
      }
    } while (std::sqrt(r2) > chart.radius);
    return c;
  };
  const auto start = random_point();
  const auto goal = random_point();
  GeodesicTrial t{n, index, geodesic_distance_exact(chart.point(start), chart.point(goal)), 0.0};
  t.approx = refine_polyline(dijkstra_geodesic(chart, start, goal, resolution), levels).length;
  return t;
}

inline constexpr double kGeodesicTolerance = 0.02;

struct GeodesicCheckOptions {
  std::vector<std::size_t> ns{3};
  std::size_t trials = 50;
  std::size_t resolution = 32;
  std::size_t levels = 3;
  std::size_t chart_dim = 2;
  std::uint64_t seed = 1;
};

/// Prints one line per trial and the maximum relative error; exit 0 iff it is
/// within 2%.
inline int cmd_geodesic_check(const GeodesicCheckOptions& opt, const Context& ctx) {
  if (opt.trials == 0) throw ConfigError("trials", "must be at least 1");
  if (opt.ns.empty()) throw ConfigError("n", "at least one dimension is required");
  for (auto n : opt.ns)
    if (n < 3) throw ConfigError("n", "must be at least 3");
  if (opt.resolution == 0) throw ConfigError("resolution", "must be positive");
  if (opt.chart_dim == 0 || opt.chart_dim > 3) throw ConfigError("chart_dim", "must lie in [1, 3]");

  double worst = 0.0;
  std::ostringstream report;
  report << std::setprecision(10);
  for (auto n : opt.ns)
    for (std::size_t i = 0; i < opt.trials; ++i) {
      const auto t = geodesic_trial(n, i, opt.resolution, opt.levels, opt.chart_dim, opt.seed);
      worst = std::max(worst, t.relative_error());
      report << "n=" << n << " trial=" << i << " exact=" << t.exact << " approx=" << t.approx
             << " rel_error=" << t.relative_error() << '\n';
    }
  const bool ok = worst <= kGeodesicTolerance;
  report << "max_relative_error=" << worst << " tolerance=" << kGeodesicTolerance
         << (ok ? " PASS" : " FAIL") << '\n';
  if (ctx.out) *ctx.out << report.str();
  return ok ? kExitOk : kExitTolerance;
}

inline int cmd_list_problems(const Context& ctx) {
  if (!ctx.out) return kExitOk;
  auto& os = *ctx.out;
  os << "onemax      --bits N                      count of ones; target N\n"
     << "trap        --bits N --block B            concatenated deceptive traps; target N\n"
     << "sphere      --dim D [--target T]          -sum x^2 on [-5,5]^D; default target -1e-3\n"
     << "rosenbrock  --dim D [--target T]          negated Rosenbrock on [-5,5]^D; default target -1e-3\n"
     << "symreg      --max-depth D [--dataset CSV] expression trees scored by -MSE; default data x^2 + x\n";
  return kExitOk;
}

}  // namespace infoevo::cli
