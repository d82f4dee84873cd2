#pragma once

// Island-style orchestration: each deme owns an input subset, an exemplar and
// a private ledger, and spawns guided sub-demes through its own loop. Demes are
// scheduled round-robin. Also the behavior-space Fisher distance between
// programs.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "infoevo/behavior.hpp"
#include "infoevo/core.hpp"
#include "infoevo/domains/expr_tree.hpp"
#include "infoevo/error.hpp"
#include "infoevo/evolve.hpp"
#include "infoevo/random.hpp"

namespace infoevo {

struct DemeBudget {
  std::size_t per_deme = 0;
  std::size_t subdemes_per_deme = 3;

  void validate(std::size_t demes, std::size_t global_budget) const {
    if (subdemes_per_deme == 0) throw ConfigError("subdemes_per_deme", "must be positive");
    if (demes == 0) throw ConfigError("demes", "must be positive");
    if (per_deme * demes > global_budget)
      throw ConfigError("budget", "per-deme budget times deme count exceeds the global budget");
  }
};

template <class G>
struct DemeSpec {
  std::size_t deme_id = 0;
  std::vector<std::size_t> feature_subset;  // sorted, nonempty
  G exemplar;
};

/// `count` demes, each with a random nonempty input subset and a random
/// exemplar built from the restricted problem.
template <Problem P>
std::vector<DemeSpec<typename P::genotype_type>> spawn_demes(const P& problem, std::size_t count,
                                                             Rng& rng) {
  if (count == 0) throw ConfigError("demes", "must be positive");
  const std::size_t arity = std::max<std::size_t>(problem.arity(), 1);
  std::vector<DemeSpec<typename P::genotype_type>> out;
  out.reserve(count);
  for (std::size_t d = 0; d < count; ++d) {
    std::vector<std::size_t> all(arity);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(1 + uniform_index(rng, arity));
    std::sort(all.begin(), all.end());
    const P restricted = problem.restricted(all);
    out.push_back({d, all, restricted.random_genotype(rng)});
  }
  return out;
}

enum class DemeStatus { active, exhausted };

/// A deme and the loop that owns its ledger. Not movable: the loop keeps a
/// reference to the restricted problem.
template <Problem P>
class Deme {
 public:
  using genotype_type = typename P::genotype_type;

  Deme(const P& problem, DemeSpec<genotype_type> spec, const LoopConfig& config,
       const DemeBudget& budget, Trace* trace)
      : spec_(std::move(spec)), problem_(problem.restricted(spec_.feature_subset)) {
    LoopConfig c = config;
    c.step.ray_count = budget.subdemes_per_deme;
    c.evolution.seed = derive_seed(config.evolution.seed, 0xde3eULL, spec_.deme_id);
    run_ = std::make_unique<InfoEvoRun<P>>(problem_, c, budget.per_deme, trace, spec_.deme_id,
                                           spec_.exemplar);
  }
  Deme(const Deme&) = delete;
  Deme& operator=(const Deme&) = delete;

  std::size_t deme_id() const noexcept { return spec_.deme_id; }
  const DemeSpec<genotype_type>& spec() const noexcept { return spec_; }
  const P& problem() const noexcept { return problem_; }
  const InfoEvoRun<P>& run() const noexcept { return *run_; }
  const EvaluationLedger<genotype_type>& ledger() const noexcept { return run_->ledger(); }
  DemeStatus status() const noexcept {
    return run_->finished() ? DemeStatus::exhausted : DemeStatus::active;
  }

  /// One loop iteration; nullopt once the deme is exhausted.
  std::optional<RoundReport> run_round() { return run_->step(); }

 private:
  DemeSpec<genotype_type> spec_;
  P problem_;
  std::unique_ptr<InfoEvoRun<P>> run_;
};

template <Problem P>
std::optional<RoundReport> run_deme_round(Deme<P>& deme) {
  return deme.run_round();
}

struct DemeRoundReport {
  std::size_t deme_id = 0;
  RoundReport round;
};

/// Round-robin scheduler over demes sharing one trace. Stops when every deme
/// is exhausted or any deme reaches the target.
template <Problem P>
class DemeOrchestrator {
 public:
  using genotype_type = typename P::genotype_type;

  DemeOrchestrator(const P& problem, const LoopConfig& config, std::size_t demes, DemeBudget budget,
                   std::size_t global_budget)
      : budget_(budget) {
    budget_.validate(demes, global_budget);
    trace_.mode = config.mode;
    Rng rng(derive_seed(config.evolution.seed, 0xde3eULL));
    for (auto& spec : spawn_demes(problem, demes, rng))
      demes_.push_back(std::make_unique<Deme<P>>(problem, std::move(spec), config, budget_, &trace_));
  }

  const Trace& trace() const noexcept { return trace_; }
  const std::vector<DemeRoundReport>& reports() const noexcept { return reports_; }
  std::size_t size() const noexcept { return demes_.size(); }
  const Deme<P>& deme(std::size_t i) const { return *demes_[i]; }

  bool finished() const {
    return target_reached() || std::all_of(demes_.begin(), demes_.end(), [](const auto& d) {
             return d->status() == DemeStatus::exhausted;
           });
  }

  bool target_reached() const {
    return std::any_of(demes_.begin(), demes_.end(), [](const auto& d) { return d->run().reached_target(); });
  }

  /// One pass over the active demes.
  std::vector<DemeRoundReport> run_round() {
    std::vector<DemeRoundReport> out;
    for (auto& d : demes_) {
      if (target_reached()) break;
      if (d->status() == DemeStatus::exhausted) continue;
      if (auto rep = d->run_round()) out.push_back({d->deme_id(), std::move(*rep)});
    }
    reports_.insert(reports_.end(), out.begin(), out.end());
    return out;
  }

  void run() {
    while (!finished()) {
      const auto before = trace_.entries.size();
      const auto reps = run_round();
      // every active deme just stopped without a round
      if (reps.empty() && trace_.entries.size() == before) break;
    }
  }

  std::size_t total_evaluations() const {
    std::size_t total = 0;
    for (const auto& d : demes_) total += d->ledger().eval_count();
    return total;
  }

  /// Best sample over all demes as (deme index, ledger index).
  std::pair<std::size_t, std::size_t> best() const {
    std::pair<std::size_t, std::size_t> at{0, 0};
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < demes_.size(); ++d) {
      const auto& l = demes_[d]->ledger();
      if (l.empty()) continue;
      const std::size_t i = best_index(l);
      if (l[i].score > best) {
        best = l[i].score;
        at = {d, i};
      }
    }
    return at;
  }

 private:
  DemeBudget budget_;
  Trace trace_;
  std::vector<std::unique_ptr<Deme<P>>> demes_;
  std::vector<DemeRoundReport> reports_;
};

/// Fisher-Rao distance between two programs' output vectors on shared probes,
/// after mapping each vector to the simplex with behavior_distribution.
/// `run(g, probe)` evaluates program g on one probe input.
template <class G, class Run>
double program_fisher_distance(const G& a, const G& b, const std::vector<std::vector<double>>& probes,
                               Run&& run, double smoothing = kBehaviorSmoothing) {
  if (probes.empty()) throw ConfigError("probes", "must be nonempty");
  std::vector<double> ya, yb;
  ya.reserve(probes.size());
  yb.reserve(probes.size());
  for (const auto& x : probes) {
    ya.push_back(run(a, x));
    yb.push_back(run(b, x));
  }
  return behavior_fisher_distance(ya, yb, smoothing);
}

inline double program_fisher_distance(const domains::ExprTree& a, const domains::ExprTree& b,
                                      const std::vector<std::vector<double>>& probes,
                                      double smoothing = kBehaviorSmoothing) {
  return program_fisher_distance(
      a, b, probes,
      [](const domains::ExprTree& t, const std::vector<double>& x) { return domains::evaluate_tree(t, x); },
      smoothing);
}

}  // namespace infoevo
