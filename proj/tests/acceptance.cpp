// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "infoevo/cli/commands.hpp"
#include "infoevo/demes.hpp"
#include "infoevo/promise.hpp"

using namespace infoevo;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LogDistribution random_distribution(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = 0.02 + uniform01(rng);
  return from_weights(w);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("infoevo-acceptance-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

cli::RunConfig config_for(const cli::json& problem, std::size_t budget, std::uint64_t seed, cli::RunMode mode) {
  cli::json doc = {{"problem", problem}, {"budget", budget}, {"seed", seed}, {"mode", cli::run_mode_name(mode)}};
  return cli::parse_config(doc);
}

// -- criteria ---------------------------------------------------------------------

Outcome manifold_invariants() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1);
  double worst_mass = 0.0, worst_tangent = 0.0, worst_fd = 0.0;
  const double h = 1e-7;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = std::array<std::size_t, 4>{2, 3, 10, 100}[t % 4];
    const auto base = random_distribution(rng, n);
    worst_mass = std::max(worst_mass, std::abs(mass(base) - 1.0));
    const auto f = gaussian_vector(rng, n);
    const auto v = project_tangent(base, f);
    worst_tangent = std::max(worst_tangent, std::abs(differential_F(base, v.f)));
    std::vector<double> shifted(base.phi());
    for (std::size_t i = 0; i < n; ++i) shifted[i] += h * f[i];
    const double fd = (mass(shifted) - mass(base)) / h;
    worst_fd = std::max(worst_fd, std::abs(fd - differential_F(base, f)));
  }
  const double secs = seconds_since(t0);
  c.expect(worst_mass <= 1e-10, "mass deviation " + fmt(worst_mass));
  c.expect(worst_tangent < 1e-10, "tangency residual " + fmt(worst_tangent));
  c.expect(worst_fd <= 1e-6, "finite-difference gap " + fmt(worst_fd));
  c.expect(secs < 5.0, "runtime " + fmt(secs) + " s");
  c.note("max |mass-1| " + fmt(worst_mass) + ", max |dF(tangent)| " + fmt(worst_tangent) + ", max fd gap " +
         fmt(worst_fd) + ", " + fmt(secs) + " s");
  return c.result();
}

Outcome geodesic_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  cli::GeodesicCheckOptions opt;
  opt.ns = {3, 5, 10};
  opt.trials = 50;
  opt.resolution = 32;
  opt.levels = 3;
  std::ostringstream report;
  const int code = cli::cmd_geodesic_check(opt, cli::Context{".", 1, &report, nullptr});
  const double secs = seconds_since(t0);
  const std::string text = report.str();
  const auto at = text.find("max_relative_error=");
  const std::string summary = at == std::string::npos ? "?" : text.substr(at, text.find(' ', at) - at);
  c.expect(code == cli::kExitOk, "geodesic-check exit " + std::to_string(code) + " (" + summary + ")");
  c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  c.note("150 trials, " + summary + ", " + fmt(secs) + " s");
  return c.result();
}

Outcome exp_log_consistency() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(3);
  double worst_norm = 0.0, worst_trip = 0.0;
  for (std::size_t n : {3u, 10u, 100u})
    for (int t = 0; t < 100; ++t) {
      const auto a = random_distribution(rng, n);
      const auto b = random_distribution(rng, n);
      const auto v = log_map(a, b);
      worst_norm = std::max(worst_norm, std::abs(norm(a, v) - geodesic_distance_exact(a, b)));
      const auto back = exp_map(a, v, 1.0);
      for (std::size_t i = 0; i < n; ++i) worst_trip = std::max(worst_trip, std::abs(back.prob(i) - b.prob(i)));
    }
  const double secs = seconds_since(t0);
  c.expect(worst_norm <= 1e-8, "norm gap " + fmt(worst_norm));
  c.expect(worst_trip < 1e-8, "round-trip error " + fmt(worst_trip));
  c.expect(secs < 5.0, "runtime " + fmt(secs) + " s");
  c.note("max norm gap " + fmt(worst_norm) + ", max round-trip error " + fmt(worst_trip) + ", " + fmt(secs) + " s");
  return c.result();
}

Outcome promise_reduction() {
  Check c;
  const auto problem = domains::BitStringProblem::onemax(10);
  const MetricSpace<domains::BitStringProblem> space(problem, DistanceMetric::genotypic());
  Rng rng(4);
  std::size_t agree = 0;
  for (int t = 0; t < 100; ++t) {
    EvaluationLedger<domains::Bits> ledger(64);
    std::vector<double> scores;
    const std::size_t n = 2 + uniform_index(rng, 62);
    while (ledger.size() < n) {
      const auto g = problem.random_genotype(rng);
      if (ledger.find(problem.key(g))) continue;
      const double s = std::normal_distribution<double>(0.0, 5.0)(rng);
      ledger.append(problem.key(g), g, s, problem.behavior(g));
      scores.push_back(s);
    }
    const auto pv = promise_vector(ledger, PromiseWeights{1, 0, 0}, space);
    const auto am = std::max_element(pv.values.begin(), pv.values.end()) - pv.values.begin();
    agree += am == std::max_element(scores.begin(), scores.end()) - scores.begin();
  }
  c.expect(agree == 100, std::to_string(agree) + "/100 argmax agreements");
  c.note("argmax agreement 100/100");
  return c.result();
}

Outcome guidance_soundness() {
  Check c;
  Rng rng(5);
  std::size_t monotone_violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const HForm h = t % 2 == 0 ? HForm{} : HForm{HKind::weighted_sum, uniform01(rng)};
    const double z1 = 3.0 * uniform01(rng), z2 = z1 + uniform01(rng);
    const double w1 = uniform01(rng), w2 = w1 + (1.0 - w1) * uniform01(rng);
    monotone_violations += h_combine(z1, w1, h) > h_combine(z2, w1, h);
    monotone_violations += h_combine(z1, w1, h) > h_combine(z1, w2, h);
  }
  c.expect(monotone_violations == 0, std::to_string(monotone_violations) + " monotonicity violations");

  const auto problem = domains::BitStringProblem::onemax(24);
  EvaluationLedger<domains::Bits> ledger(20000);
  while (ledger.size() < 80) evaluate(problem.random_genotype(rng), problem, ledger);
  const std::size_t n = ledger.size();
  std::vector<double> w(n);
  for (auto& x : w) x = uniform01(rng);
  const ModifiedPromise mp{uniform_distribution(n), from_weights(w), {}, {}, false};

  // threshold quantile 0 accepts every candidate
  const auto population = snapshot(ledger, 256, [&](const domains::Bits& g) { return problem.key(g); });
  const Guide<domains::BitStringProblem> open(problem, population, mp, FilterPolicy{7, 0.0, DistanceMetric::blended(0.5)});
  std::vector<domains::Bits> candidates;
  for (int t = 0; t < 10000; ++t) candidates.push_back(problem.random_genotype(rng));
  std::size_t rejected = 0;
  for (const auto& d : open.decide_batch(candidates)) rejected += !d.evaluate;
  c.expect(rejected == 0, std::to_string(rejected) + " candidates rejected at quantile 0");

  // skipped candidates never reach the ledger within their generation
  const Guide<domains::BitStringProblem> strict(problem, population, mp, FilterPolicy{7, 0.5, DistanceMetric::blended(0.5)});
  std::vector<Member<domains::Bits>> parents;
  for (std::size_t i = 0; i < 32; ++i) parents.push_back({ledger[i].genotype, ledger[i].score, 0.0});
  EvolutionConfig ec;
  ec.generations_per_round = 40;
  Rng vary_rng(6);
  const auto rep = run_subpopulation(parents, strict, ec, problem, ledger, vary_rng, nullptr, 0, true);
  std::size_t leaks = 0, skipped = 0;
  for (const auto& gen : rep.generations) {
    std::set<std::string> evaluated(gen.evaluated.begin(), gen.evaluated.end());
    for (const auto& k : gen.skipped) leaks += evaluated.count(k);
    skipped += gen.skipped.size();
  }
  c.expect(leaks == 0, std::to_string(leaks) + " skipped candidates evaluated");
  c.expect(skipped > 0, "filter never skipped, soundness check vacuous");
  c.note("20000 monotonicity checks, 10000 candidates at quantile 0, " + std::to_string(skipped) +
         " skipped candidates over " + std::to_string(rep.generations_run) + " generations, 0 evaluated");
  return c.result();
}

Outcome determinism() {
  Check c;
  const auto dir = scratch("determinism");
  const auto cfg = config_for({{"name", "onemax"}, {"bits", 50}}, 20000, 1, cli::RunMode::info_evo);
  cli::cmd_run(cfg, cli::Context{dir / "a", 1, nullptr, nullptr});
  cli::cmd_run(cfg, cli::Context{dir / "b", 1, nullptr, nullptr});
  const std::string a = slurp(dir / "a" / "trace.jsonl"), b = slurp(dir / "b" / "trace.jsonl");
  c.expect(!a.empty() && a == b, "trace files differ");
  const auto lines = static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n'));
  c.expect(lines - 1 <= 20000, "trace longer than the budget");
  c.note("two onemax-50 runs, " + std::to_string(lines - 1) + " trace entries, byte-identical");
  std::filesystem::remove_all(dir);
  return c.result();
}

Outcome desk_scale_runs() {
  Check c;
  std::ostringstream detail;
  auto run_both = [&](const std::string& label, const cli::json& problem, std::size_t budget, double limit,
                      bool must_reach) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = config_for(problem, budget, 1, cli::RunMode::paired);
    for (Mode m : {Mode::info_evo, Mode::baseline}) {
      const auto o = cli::execute_mode(cfg, m, 1, 1);
      c.expect(o.evaluations <= budget, label + " exceeded budget");
      if (must_reach) c.expect(o.reached_target, label + " " + mode_name(m) + " missed the target");
      detail << label << ' ' << mode_name(m) << (o.reached_target ? " reached@" : " best ")
             << (o.reached_target ? std::to_string(o.evals_to_target) : fmt(o.best_score)) << "; ";
    }
    const double secs = seconds_since(t0);
    c.expect(secs < limit, label + " took " + fmt(secs) + " s");
    detail << fmt(secs) << " s; ";
  };
  run_both("onemax-50", {{"name", "onemax"}, {"bits", 50}}, 20000, 60.0, true);
  run_both("sphere-10", {{"name", "sphere"}, {"dim", 10}, {"target", -1e-3}}, 20000, 120.0, false);
  run_both("symreg", {{"name", "symreg"}, {"max_depth", 5}}, 30000, 180.0, false);

  const auto dir = scratch("compare");
  std::ostringstream csv_out;
  const auto cfg = config_for({{"name", "onemax"}, {"bits", 50}}, 20000, 1, cli::RunMode::paired);
  cli::cmd_compare(cfg, 3, cli::Context{dir, 1, &csv_out, nullptr});
  const std::string csv = slurp(dir / "compare.csv");
  std::size_t rows = 0, baseline_skips = 0;
  std::string medians;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++rows;
    if (line.find(",baseline,") != std::string::npos && line.rfind("median", 0) != 0 &&
        line.substr(line.rfind(',') + 1) != "0")
      ++baseline_skips;
    if (line.rfind("median", 0) == 0) {
      std::istringstream cells(line);
      std::string label, mode, evals;
      std::getline(cells, label, ',');
      std::getline(cells, mode, ',');
      std::getline(cells, evals, ',');
      medians += mode + " median evals-to-target " + evals + "; ";
    }
  }
  c.expect(rows == 1 + 6 + 2, "compare.csv has " + std::to_string(rows) + " rows");
  c.expect(baseline_skips == 0, "baseline rows report skipped candidates");
  detail << "compare: header + 6 rows + 2 medians; " << medians.substr(0, medians.size() - 2);
  std::filesystem::remove_all(dir);
  c.note(detail.str());
  return c.result();
}

Outcome resource_factor() {
  Check c;
  const auto problem = domains::BitStringProblem::onemax(300);
  LoopConfig loop;
  loop.evolution.seed = 8;
  loop.filter.threshold_quantile = 0.0;
  loop.max_rounds = 3;
  const DemeBudget budget{50000, 5};
  DemeOrchestrator<domains::BitStringProblem> orch(problem, loop, 2, budget, 100000);
  orch.run();
  const std::size_t kept = kept_ray_count(budget.subdemes_per_deme);
  const std::size_t per_subdeme = loop.evolution.generations_per_round * loop.evolution.offspring_per_generation();
  std::size_t checked = 0;
  for (const auto& r : orch.reports()) {
    std::size_t offspring = 0, skipped = 0;
    for (const auto& s : r.round.subdemes) {
      offspring += s.offspring_produced;
      skipped += s.candidates_skipped;
    }
    c.expect(r.round.subdemes.size() == kept, "round kept " + std::to_string(r.round.subdemes.size()) + " sub-demes");
    c.expect(offspring == kept * per_subdeme,
             "deme " + std::to_string(r.deme_id) + " round " + std::to_string(r.round.round_index) + ": " +
                 std::to_string(offspring) + " candidate generations, expected " + std::to_string(kept * per_subdeme));
    c.expect(skipped == 0, "filter skipped candidates while disabled");
    ++checked;
  }
  c.expect(checked == 6, "expected 6 deme rounds, saw " + std::to_string(checked));
  c.note(std::to_string(checked) + " deme rounds, each " + std::to_string(kept) + " kept sub-demes x " +
         std::to_string(per_subdeme) + " = " + std::to_string(kept * per_subdeme) + " candidate generations");
  return c.result();
}

Outcome program_distance() {
  Check c;
  const auto probes = domains::default_dataset().inputs;
  const domains::ExprTree t{{domains::Node::make_op(domains::Op::mul), domains::Node::var(0), domains::Node::var(0)}};
  c.expect(program_fisher_distance(t, t, probes) == 0.0, "identical programs at nonzero distance");
  const std::vector<double> a{1, 3}, b{3, 1};
  const double limit = behavior_fisher_distance(a, b, 0.0);
  c.expect(std::abs(limit - std::numbers::pi / 3) <= 1e-6, "(1,3)/(3,1) distance " + fmt(limit));
  Rng rng(9);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::size_t asym = 0, triangle = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t v = 2 + uniform_index(rng, 10);
    std::vector<double> x(v), y(v), z(v);
    for (std::size_t i = 0; i < v; ++i) {
      x[i] = normal(rng);
      y[i] = normal(rng);
      z[i] = normal(rng);
    }
    const double xy = behavior_fisher_distance(x, y);
    asym += xy != behavior_fisher_distance(y, x);
    triangle += behavior_fisher_distance(x, z) > xy + behavior_fisher_distance(y, z) + 1e-9;
  }
  c.expect(asym == 0, std::to_string(asym) + " asymmetric pairs");
  c.expect(triangle == 0, std::to_string(triangle) + " triangle violations");
  c.note("(1,3)/(3,1) = " + fmt(limit) + " (pi/3 gap " + fmt(std::abs(limit - std::numbers::pi / 3)) +
         "), 1000 triples symmetric and triangle-consistent");
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"manifold invariants", manifold_invariants},
      {"geodesic oracle equivalence", geodesic_oracle},
      {"exp/log consistency", exp_log_consistency},
      {"promise reduction", promise_reduction},
      {"guidance monotonicity and filter soundness", guidance_soundness},
      {"end-to-end determinism", determinism},
      {"desk-scale end-to-end runs", desk_scale_runs},
      {"resource factor", resource_factor},
      {"program Fisher distance", program_distance},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
