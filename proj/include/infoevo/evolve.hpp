#pragma once

// Evolutionary engine and the guided outer loop. Each loop iteration rebuilds
// the working population, derives a promise distribution, shoots geodesic
// rays from it, keeps the best-ranked stepped distributions, and runs one
// guided sub-population per kept ray against the shared ledger.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/geodesic_search.hpp"
#include "infoevo/guidance.hpp"
#include "infoevo/manifold.hpp"
#include "infoevo/promise.hpp"
#include "infoevo/random.hpp"

namespace infoevo {

struct EvolutionConfig {
  std::size_t subpop_size = 32;
  std::size_t generations_per_round = 5;
  double mutation_rate = 0.05;
  double crossover_rate = 0.5;
  std::size_t elitism = 2;
  double eda_fraction = 0.25;
  std::size_t tournament_size = 3;
  std::uint64_t seed = 1;

  std::size_t offspring_per_generation() const noexcept { return subpop_size - elitism; }

  void validate() const {
    if (subpop_size == 0) throw ConfigError("subpop_size", "must be positive");
    if (generations_per_round == 0) throw ConfigError("generations_per_round", "must be positive");
    if (!(mutation_rate > 0.0 && mutation_rate <= 1.0))
      throw ConfigError("mutation_rate", "must lie in (0, 1]");
    if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0))
      throw ConfigError("crossover_rate", "must lie in [0, 1]");
    if (elitism >= subpop_size) throw ConfigError("elitism", "must be below subpop_size");
    if (!(eda_fraction >= 0.0 && eda_fraction <= 1.0))
      throw ConfigError("eda_fraction", "must lie in [0, 1]");
    if (tournament_size == 0) throw ConfigError("tournament_size", "must be positive");
  }
};

enum class Mode { info_evo, baseline };

inline const char* mode_name(Mode m) { return m == Mode::info_evo ? "info_evo" : "baseline"; }

struct LoopConfig {
  EvolutionConfig evolution;
  PromiseWeights promise;
  StepParams step;
  FilterPolicy filter;
  OmegaSpec omega;
  HForm h;
  Mode mode = Mode::info_evo;
  std::size_t initial_population = 64;
  std::size_t population_cap = 256;  // size of the working population
  std::size_t max_rounds = 0;        // 0: no limit
  std::size_t stall_rounds = 20;     // stop after this many rounds without a new evaluation
  double gamma_floor = 0.01;
  std::size_t threads = 1;
  bool record_generations = false;

  void validate() const {
    evolution.validate();
    promise.validate();
    step.validate();
    filter.validate();
    if (omega.k == 0) throw ConfigError("omega.k", "must be positive");
    if (h.kind == HKind::weighted_sum && !(h.alpha >= 0.0 && h.alpha <= 1.0))
      throw ConfigError("h.alpha", "must lie in [0, 1]");
    if (!(h.omega0 >= 0.0)) throw ConfigError("h.omega0", "must be nonnegative");
    if (initial_population < 2) throw ConfigError("initial_population", "must be at least 2");
    if (population_cap < 4) throw ConfigError("population_cap", "must be at least 4");
    if (!(gamma_floor > 0.0)) throw ConfigError("gamma_floor", "must be positive");
    if (stall_rounds == 0) throw ConfigError("stall_rounds", "must be positive");
  }
};

/// Number of rays whose sub-demes run each round.
inline std::size_t kept_ray_count(std::size_t ray_count) { return (ray_count + 1) / 2; }

// ---------------------------------------------------------------------------
// Reports and trace

struct GenerationLog {
  std::vector<std::string> skipped;    // keys the filter rejected
  std::vector<std::string> evaluated;  // keys appended to the ledger
};

/// One sub-deme's share of a round. offspring_produced counts every genotype
/// returned by variation; candidates_generated counts only those not already
/// in the ledger or earlier in the same batch.
struct SubdemeReport {
  std::size_t ray_rank = 0;
  std::size_t generations_run = 0;
  std::size_t offspring_produced = 0;
  std::size_t candidates_generated = 0;
  std::size_t candidates_skipped = 0;
  std::size_t candidates_evaluated = 0;
  bool stopped_early = false;
  double best_score = 0.0;
  std::vector<GenerationLog> generations;
};

struct RoundReport {
  std::size_t round_index = 0;
  std::size_t rays_generated = 0;
  std::size_t rays_used = 0;
  std::size_t candidates_generated = 0;
  std::size_t candidates_skipped = 0;
  std::size_t candidates_evaluated = 0;
  double best_score_before = 0.0;
  double best_score_after = 0.0;
  double gamma_used = 0.0;
  bool chart_degenerate = false;
  std::vector<SubdemeReport> subdemes;
};

struct TraceEntry {
  std::uint64_t eval_order = 0;
  double score = 0.0;
  std::size_t deme_id = 0;
  std::size_t skipped_so_far = 0;
};

/// Evaluation trace shared by every deme of one run; order is global.
struct Trace {
  Mode mode = Mode::info_evo;
  std::size_t skipped = 0;
  std::vector<TraceEntry> entries;

  void record(double score, std::size_t deme_id) {
    entries.push_back({entries.size(), score, deme_id, skipped});
  }
};

enum class StopReason { none, target_reached, budget_exhausted, stalled, max_rounds };

inline const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::none: return "none";
    case StopReason::target_reached: return "target_reached";
    case StopReason::budget_exhausted: return "budget_exhausted";
    case StopReason::stalled: return "stalled";
    case StopReason::max_rounds: return "max_rounds";
  }
  return "none";
}

// ---------------------------------------------------------------------------
// Variation

template <class G>
struct Member {
  G genotype;
  double score = 0.0;
  double fitness = 0.0;  // modified promise under the sub-deme's guidance
};

namespace detail {
template <class G>
std::size_t tournament(const std::vector<Member<G>>& parents, std::size_t size, Rng& rng) {
  std::size_t best = uniform_index(rng, parents.size());
  for (std::size_t t = 1; t < size; ++t) {
    const std::size_t c = uniform_index(rng, parents.size());
    if (parents[c].fitness > parents[best].fitness ||
        (parents[c].fitness == parents[best].fitness && c < best))
      best = c;
  }
  return best;
}

/// Indices sorted by descending key, ties by index.
template <class Key>
std::vector<std::size_t> ranked(std::size_t n, Key key) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) > key(b); });
  return order;
}
}  // namespace detail

/// Smoothed per-locus marginals of the top quartile of `parents` by fitness.
/// With top-quartile frequency f of value v at a locus with K values,
/// p(v) = (1 - eps) f + eps (1 - f) / (K - 1), eps = 1 / m.
template <Problem P>
Marginals eda_marginals(const std::vector<Member<typename P::genotype_type>>& parents,
                        const P& problem, std::size_t m) {
  const auto order = detail::ranked(parents.size(), [&](std::size_t i) { return parents[i].fitness; });
  const std::size_t top = std::max<std::size_t>(1, parents.size() / 4);
  const auto alphabet = problem.locus_alphabet();
  Marginals freq(alphabet.size());
  for (std::size_t i = 0; i < alphabet.size(); ++i) freq[i].assign(static_cast<std::size_t>(alphabet[i]), 0.0);
  for (std::size_t r = 0; r < top; ++r) {
    const auto loci = problem.loci(parents[order[r]].genotype);
    for (std::size_t i = 0; i < loci.size(); ++i) freq[i][static_cast<std::size_t>(loci[i])] += 1.0;
  }
  const double eps = 1.0 / static_cast<double>(m);
  for (auto& row : freq) {
    const double k = static_cast<double>(row.size());
    for (auto& f : row) {
      f /= static_cast<double>(top);
      if (row.size() > 1) f = (1.0 - eps) * f + eps * (1.0 - f) / (k - 1.0);
    }
  }
  return freq;
}

/// Produces m - elitism offspring. The first share comes from tournament
/// selection on fitness, crossover with probability crossover_rate, then
/// mutation; the last round(eda_fraction * count) are sampled from the
/// top-quartile marginals.
template <Problem P>
std::vector<typename P::genotype_type> vary(const std::vector<Member<typename P::genotype_type>>& parents,
                                            const EvolutionConfig& config, const P& problem, Rng& rng) {
  if (parents.empty()) throw EmptyLedger();
  const std::size_t count = config.offspring_per_generation();
  const auto eda = static_cast<std::size_t>(std::llround(config.eda_fraction * static_cast<double>(count)));
  std::vector<typename P::genotype_type> out;
  out.reserve(count);
  for (std::size_t c = 0; c + eda < count; ++c) {
    const auto& a = parents[detail::tournament(parents, config.tournament_size, rng)].genotype;
    auto child = a;
    if (bernoulli(rng, config.crossover_rate)) {
      const auto& b = parents[detail::tournament(parents, config.tournament_size, rng)].genotype;
      child = problem.crossover(a, b, rng);
    }
    out.push_back(problem.mutate(child, config.mutation_rate, rng));
  }
  if (eda > 0) {
    const Marginals marginals = eda_marginals(parents, problem, config.subpop_size);
    for (std::size_t c = 0; c < eda; ++c) out.push_back(problem.sample_loci(marginals, rng));
  }
  return out;
}

/// Next parents: the `elitism` best by raw score from parents and offspring,
/// then offspring by modified fitness, topped up from the old parents.
template <class G, class KeyOf>
std::vector<Member<G>> select_parents(const std::vector<Member<G>>& parents,
                                      const std::vector<Member<G>>& offspring, std::size_t m,
                                      std::size_t elitism, const KeyOf& key_of) {
  std::vector<Member<G>> pool = parents;
  pool.insert(pool.end(), offspring.begin(), offspring.end());
  std::vector<Member<G>> next;
  std::unordered_set<std::string> taken;
  auto take = [&](const Member<G>& mbr) {
    if (next.size() >= m) return;
    if (taken.insert(key_of(mbr.genotype)).second) next.push_back(mbr);
  };
  const auto by_score = detail::ranked(pool.size(), [&](std::size_t i) { return pool[i].score; });
  for (std::size_t r = 0; r < by_score.size() && next.size() < elitism; ++r) take(pool[by_score[r]]);
  const auto by_fit = detail::ranked(offspring.size(), [&](std::size_t i) { return offspring[i].fitness; });
  for (std::size_t i : by_fit) take(offspring[i]);
  const auto old = detail::ranked(parents.size(), [&](std::size_t i) { return parents[i].fitness; });
  for (std::size_t i : old) take(parents[i]);
  return next;
}

/// Runs one guided sub-population for generations_per_round generations.
/// Novel offspring go through the filter against the guide's snapshot; the
/// accepted ones are evaluated into the shared ledger. Budget exhaustion ends
/// the fragment early.
template <Problem P>
SubdemeReport run_subpopulation(std::vector<Member<typename P::genotype_type>> parents,
                                const Guide<P>& guide, const EvolutionConfig& config,
                                const P& problem, EvaluationLedger<typename P::genotype_type>& ledger,
                                Rng& rng, Trace* trace = nullptr, std::size_t deme_id = 0,
                                bool record_generations = false) {
  using G = typename P::genotype_type;
  if (parents.empty()) throw EmptyLedger();
  SubdemeReport rep;
  auto key_of = [&](const G& g) { return problem.key(g); };
  rep.best_score = parents.front().score;
  for (const auto& p : parents) rep.best_score = std::max(rep.best_score, p.score);

  for (std::size_t gen = 0; gen < config.generations_per_round; ++gen) {
    if (ledger.exhausted()) {
      rep.stopped_early = true;
      break;
    }
    GenerationLog log;
    const auto children = vary(parents, config, problem, rng);
    rep.offspring_produced += children.size();
    ++rep.generations_run;

    std::vector<Member<G>> offspring;
    std::vector<G> novel;
    std::unordered_set<std::string> seen;
    for (const auto& c : children) {
      std::string key = problem.key(c);
      if (!seen.insert(key).second) continue;
      if (auto hit = ledger.find(key)) {
        // known genotype: its score is free, so it can still compete
        const auto& s = ledger[*hit];
        offspring.push_back({c, s.score, guide.fitness(c, s.score)});
        continue;
      }
      novel.push_back(c);
    }

    const auto decisions = guide.decide_batch(novel);
    for (std::size_t i = 0; i < novel.size(); ++i) {
      if (ledger.exhausted()) {
        rep.stopped_early = true;
        break;
      }
      ++rep.candidates_generated;
      if (!decisions[i].evaluate) {
        ++rep.candidates_skipped;
        if (trace) ++trace->skipped;
        if (record_generations) log.skipped.push_back(problem.key(novel[i]));
        continue;
      }
      const auto& s = evaluate(novel[i], problem, ledger);
      ++rep.candidates_evaluated;
      if (trace) trace->record(s.score, deme_id);
      if (record_generations) log.evaluated.push_back(problem.key(novel[i]));
      rep.best_score = std::max(rep.best_score, s.score);
      offspring.push_back({novel[i], s.score, guide.fitness(novel[i], s.score)});
    }
    if (record_generations) rep.generations.push_back(std::move(log));
    parents = select_parents(parents, offspring, config.subpop_size, config.elitism, key_of);
    if (rep.stopped_early) break;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Outer loop

template <class G>
struct RunResult {
  G best_genotype{};
  double best_score = 0.0;
  bool reached_target = false;
  StopReason stop = StopReason::none;
  std::size_t initial_population = 0;
  std::size_t evaluations = 0;
  std::vector<RoundReport> rounds;
};

template <Problem P>
class InfoEvoRun {
 public:
  using genotype_type = typename P::genotype_type;

  /// `trace` may be shared with other runs (one per deme); `exemplar`, when
  /// given, is the first member of the initial population.
  InfoEvoRun(const P& problem, LoopConfig config, std::size_t budget, Trace* trace = nullptr,
             std::size_t deme_id = 0, std::optional<genotype_type> exemplar = std::nullopt)
      : problem_(problem),
        config_(std::move(config)),
        ledger_(budget),
        trace_(trace),
        deme_id_(deme_id),
        exemplar_(std::move(exemplar)),
        gamma_(config_.step.gamma) {
    config_.validate();
    if (config_.mode == Mode::baseline) config_.filter.threshold_quantile = 0.0;
  }

  const EvaluationLedger<genotype_type>& ledger() const noexcept { return ledger_; }
  const LoopConfig& config() const noexcept { return config_; }
  const std::vector<RoundReport>& rounds() const noexcept { return rounds_; }
  double gamma() const noexcept { return gamma_; }
  StopReason stop_reason() const noexcept { return stop_; }
  bool finished() const noexcept { return stop_ != StopReason::none; }
  std::size_t deme_id() const noexcept { return deme_id_; }

  bool reached_target() const {
    const auto t = problem_.target();
    return t && !ledger_.empty() && best_score(ledger_) >= *t;
  }

  /// Evaluates the initial population. Called implicitly by the first step().
  void initialize() {
    if (initialized_) return;
    initialized_ = true;
    Rng rng(derive_seed(config_.evolution.seed, 0x1417ULL));
    const std::size_t want = std::min(config_.initial_population, ledger_.budget());
    auto add = [&](const genotype_type& g) {
      if (ledger_.find(problem_.key(g)) || ledger_.exhausted()) return;
      const auto& s = evaluate(g, problem_, ledger_);
      if (trace_) trace_->record(s.score, deme_id_);
    };
    if (exemplar_ && want > 0) add(*exemplar_);
    for (std::size_t attempts = 0; ledger_.size() < want && attempts < 100 * want + 100; ++attempts)
      add(problem_.random_genotype(rng));
    initial_ = ledger_.size();
    update_stop();
  }

  /// One loop iteration; returns nullopt once the run has stopped.
  std::optional<RoundReport> step() {
    initialize();
    if (finished()) return std::nullopt;
    if (ledger_.size() < 2) {
      stop_ = StopReason::stalled;
      return std::nullopt;
    }

    const std::size_t round = rounds_.size();
    RoundReport rep;
    rep.round_index = round;
    rep.best_score_before = best_score(ledger_);
    rep.gamma_used = gamma_;

    auto key_of = [&](const genotype_type& g) { return problem_.key(g); };
    const auto population = snapshot(ledger_, config_.population_cap, key_of);
    const std::size_t n = population.size();
    const std::size_t keep = kept_ray_count(config_.step.ray_count);

    std::vector<ModifiedPromise> promises;
    if (config_.mode == Mode::info_evo) {
      const MetricSpace<P> space(problem_, config_.filter.metric, population);
      const PromiseVector pv = promise_vector(population, config_.promise, space);
      const LogDistribution base = pv.distribution();
      StepParams sp = config_.step;
      sp.gamma = gamma_;
      sp.chart_dim = std::min(sp.chart_dim, n - 1);
      const Chart chart = build_chart(base, pv, sp.chart_dim, 2.0 * gamma_,
                                      derive_seed(config_.evolution.seed, round, 0xc4a7ULL));
      rep.chart_degenerate = chart.degenerate;
      const auto rays = geodesic_rays(chart, sp, derive_seed(config_.evolution.seed, round, 0x7a75ULL));
      rep.rays_generated = rays.size();
      std::vector<LogDistribution> stepped;
      stepped.reserve(rays.size());
      for (const auto& ray : rays) stepped.push_back(step_along(ray, std::min(gamma_, ray.polyline.length)));
      const auto order = rank_rays(stepped, pv);
      for (std::size_t r = 0; r < order.size() && promises.size() < keep; ++r) {
        ModifiedPromise mp{base, stepped[order[r]], config_.omega, config_.h, false};
        // a projection needs a line; a ray that did not move falls back to kNN mass
        if (mp.omega.kind == OmegaKind::projection && geodesic_distance_exact(base, mp.target) == 0.0)
          mp.omega.kind = OmegaKind::knn_mass;
        promises.push_back(std::move(mp));
      }
    } else {
      const LogDistribution flat = uniform_distribution(n);
      rep.rays_generated = keep;
      for (std::size_t r = 0; r < keep; ++r) promises.push_back({flat, flat, config_.omega, config_.h, true});
    }
    rep.rays_used = promises.size();

    for (std::size_t r = 0; r < promises.size(); ++r) {
      if (ledger_.exhausted()) break;
      const Guide<P> guide(problem_, population, promises[r], config_.filter, config_.threads);
      Rng rng(derive_seed(config_.evolution.seed, round, 0x5dULL, r));
      auto frag = run_subpopulation(seed_parents(population, guide), guide, config_.evolution, problem_,
                                    ledger_, rng, trace_, deme_id_, config_.record_generations);
      frag.ray_rank = r;
      rep.candidates_generated += frag.candidates_generated;
      rep.candidates_skipped += frag.candidates_skipped;
      rep.candidates_evaluated += frag.candidates_evaluated;
      rep.subdemes.push_back(std::move(frag));
      if (reached_target()) break;
    }
    rep.best_score_after = best_score(ledger_);
    adapt(rep);
    rounds_.push_back(rep);
    update_stop();
    return rep;
  }

  RunResult<genotype_type> run() {
    initialize();
    while (step()) {
    }
    return result();
  }

  RunResult<genotype_type> result() const {
    RunResult<genotype_type> out;
    out.stop = stop_;
    out.initial_population = initial_;
    out.evaluations = ledger_.eval_count();
    out.rounds = rounds_;
    if (!ledger_.empty()) {
      const auto& best = ledger_[best_index(ledger_)];
      out.best_genotype = best.genotype;
      out.best_score = best.score;
      out.reached_target = reached_target();
    }
    return out;
  }

 private:
  /// The top-m population members by modified fitness, ties by index.
  std::vector<Member<genotype_type>> seed_parents(const EvaluationLedger<genotype_type>& population,
                                                  const Guide<P>& guide) const {
    const auto& fit = guide.sample_fitness();
    const auto order = detail::ranked(population.size(), [&](std::size_t i) { return fit[i]; });
    std::vector<Member<genotype_type>> parents;
    for (std::size_t r = 0; r < order.size() && parents.size() < config_.evolution.subpop_size; ++r) {
      const auto& s = population[order[r]];
      parents.push_back({s.genotype, s.score, fit[order[r]]});
    }
    return parents;
  }

  // gamma halves after two consecutive rounds without improvement
  void adapt(const RoundReport& rep) {
    if (rep.best_score_after > rep.best_score_before) {
      flat_rounds_ = 0;
    } else if (++flat_rounds_ >= 2) {
      gamma_ = std::max(gamma_ / 2.0, config_.gamma_floor);
      flat_rounds_ = 0;
    }
    stall_ = rep.candidates_evaluated == 0 ? stall_ + 1 : 0;
  }

  void update_stop() {
    if (reached_target())
      stop_ = StopReason::target_reached;
    else if (ledger_.exhausted())
      stop_ = StopReason::budget_exhausted;
    else if (stall_ >= config_.stall_rounds)
      stop_ = StopReason::stalled;
    else if (config_.max_rounds > 0 && rounds_.size() >= config_.max_rounds)
      stop_ = StopReason::max_rounds;
  }

  const P& problem_;
  LoopConfig config_;
  EvaluationLedger<genotype_type> ledger_;
  Trace* trace_;
  std::size_t deme_id_;
  std::optional<genotype_type> exemplar_;
  double gamma_;
  std::vector<RoundReport> rounds_;
  std::size_t initial_ = 0;
  std::size_t flat_rounds_ = 0;
  std::size_t stall_ = 0;
  bool initialized_ = false;
  StopReason stop_ = StopReason::none;
};

/// Convenience wrapper: one run on a fresh ledger of the given budget.
template <Problem P>
RunResult<typename P::genotype_type> info_evo_loop(const P& problem, const LoopConfig& config,
                                                   std::size_t budget, Trace* trace = nullptr) {
  InfoEvoRun<P> run(problem, config, budget, trace);
  return run.run();
}

}  // namespace infoevo
