#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "infoevo/error.hpp"
#include "infoevo/random.hpp"

namespace infoevo {

/// Per-locus categorical distributions used by EDA sampling.
using Marginals = std::vector<std::vector<double>>;

/// An optimization domain. Scores are maximized; `key` is the canonical
/// serialization used to deduplicate genotypes; `behavior` is the phenotype
/// vector consumed by the phenotypic distance.
template <class P>
concept Problem = requires(const P& p, const typename P::genotype_type& g, Rng& rng,
                           const Marginals& marginals, std::span<const double> behavior,
                           const std::vector<std::size_t>& subset) {
  typename P::genotype_type;
  { p.name() } -> std::convertible_to<std::string>;
  { p.score(g) } -> std::convertible_to<double>;
  { p.target() } -> std::same_as<std::optional<double>>;
  { p.key(g) } -> std::convertible_to<std::string>;
  { p.render(g) } -> std::convertible_to<std::string>;
  { p.random_genotype(rng) } -> std::same_as<typename P::genotype_type>;
  { p.mutate(g, 0.1, rng) } -> std::same_as<typename P::genotype_type>;
  { p.crossover(g, g, rng) } -> std::same_as<typename P::genotype_type>;
  { p.loci(g) } -> std::same_as<std::vector<int>>;
  { p.locus_alphabet() } -> std::same_as<std::vector<int>>;
  { p.sample_loci(marginals, rng) } -> std::same_as<typename P::genotype_type>;
  { p.genotypic_distance(g, g) } -> std::convertible_to<double>;
  { p.behavior(g) } -> std::same_as<std::vector<double>>;
  { p.behavioral_distance(behavior, behavior) } -> std::convertible_to<double>;
  { p.arity() } -> std::convertible_to<std::size_t>;
  { p.restricted(subset) } -> std::same_as<P>;
};

/// Dense index of an evaluated genotype within its ledger.
struct GenotypeId {
  std::size_t index = 0;
  friend auto operator<=>(const GenotypeId&, const GenotypeId&) = default;
};

template <class G>
struct ScoredSample {
  GenotypeId id;
  G genotype;
  double score = 0.0;
  std::uint64_t eval_order = 0;
  std::vector<double> behavior;  // cached phenotype
};

/// Append-only record of evaluated genotypes with a hard evaluation budget.
template <class G>
class EvaluationLedger {
 public:
  explicit EvaluationLedger(std::size_t budget) : budget_(budget) {}

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t eval_count() const noexcept { return samples_.size(); }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t remaining() const noexcept { return budget_ - samples_.size(); }
  bool exhausted() const noexcept { return samples_.size() >= budget_; }

  const ScoredSample<G>& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<ScoredSample<G>>& samples() const noexcept { return samples_; }
  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

  std::optional<std::size_t> find(const std::string& key) const {
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    return std::nullopt;
  }

  const ScoredSample<G>& append(std::string key, G genotype, double score,
                                std::vector<double> behavior) {
    if (exhausted()) throw BudgetExhausted();
    const std::size_t id = samples_.size();
    samples_.push_back(ScoredSample<G>{GenotypeId{id}, std::move(genotype), score,
                                       static_cast<std::uint64_t>(id), std::move(behavior)});
    index_.emplace(std::move(key), id);
    return samples_.back();
  }

 private:
  std::vector<ScoredSample<G>> samples_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t budget_;
};

/// Memoized application of the scoring function. Re-evaluating a known genotype
/// returns the stored sample without consuming budget.
template <Problem P>
const ScoredSample<typename P::genotype_type>& evaluate(
    const typename P::genotype_type& genotype, const P& problem,
    EvaluationLedger<typename P::genotype_type>& ledger) {
  std::string key = problem.key(genotype);
  if (auto hit = ledger.find(key)) return ledger[*hit];
  if (ledger.exhausted()) throw BudgetExhausted();
  const double score = problem.score(genotype);
  return ledger.append(std::move(key), genotype, score, problem.behavior(genotype));
}

template <class G>
double best_score(const EvaluationLedger<G>& ledger) {
  if (ledger.empty()) throw EmptyLedger();
  double best = ledger[0].score;
  for (const auto& s : ledger) best = std::max(best, s.score);
  return best;
}

template <class G>
std::size_t best_index(const EvaluationLedger<G>& ledger) {
  if (ledger.empty()) throw EmptyLedger();
  std::size_t best = 0;
  for (std::size_t i = 1; i < ledger.size(); ++i)
    if (ledger[i].score > ledger[best].score) best = i;
  return best;
}

/// Copies a bounded working population out of a ledger: the best `cap / 2`
/// samples by score plus the most recent ones, renumbered densely in
/// evaluation order. Returns the ledger unchanged when it already fits.
template <class G>
EvaluationLedger<G> snapshot(const EvaluationLedger<G>& ledger, std::size_t cap,
                             const auto& key_of) {
  std::vector<std::size_t> chosen;
  if (ledger.size() <= cap) {
    chosen.resize(ledger.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> order(ledger.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t top = cap / 2;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (ledger[a].score != ledger[b].score)
                          return ledger[a].score > ledger[b].score;
                        return a < b;
                      });
    std::vector<bool> taken(ledger.size(), false);
    for (std::size_t i = 0; i < top; ++i) taken[order[i]] = true;
    std::size_t need = cap - top;
    for (std::size_t i = ledger.size(); i-- > 0 && need > 0;) {
      if (!taken[i]) {
        taken[i] = true;
        --need;
      }
    }
    for (std::size_t i = 0; i < ledger.size(); ++i)
      if (taken[i]) chosen.push_back(i);
  }
  EvaluationLedger<G> out(chosen.size());
  for (std::size_t i : chosen) {
    const auto& s = ledger[i];
    out.append(key_of(s.genotype), s.genotype, s.score, s.behavior);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distances between genotypes

enum class MetricKind { genotypic, phenotypic, blended };

struct DistanceMetric {
  MetricKind kind = MetricKind::blended;
  double lambda = 0.5;  // weight of the genotypic term when blended

  static DistanceMetric genotypic() { return {MetricKind::genotypic, 1.0}; }
  static DistanceMetric phenotypic() { return {MetricKind::phenotypic, 0.0}; }
  static DistanceMetric blended(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw ConfigError("lambda", "blend weight must lie in [0, 1]");
    return {MetricKind::blended, lambda};
  }
};

/// A genotype prepared for distance queries: behavior is computed once.
template <class G>
struct Query {
  const G* genotype = nullptr;
  std::vector<double> behavior;
};

/// Distance function bound to a problem and to the scale of one ledger.
///
/// The blended metric is lambda * d_geno / median(d_geno) +
/// (1 - lambda) * d_pheno / median(d_pheno), with medians taken over at most
/// 1000 ledger pairs chosen by a fixed-seed generator.
template <Problem P>
class MetricSpace {
 public:
  using genotype_type = typename P::genotype_type;

  MetricSpace(const P& problem, DistanceMetric metric) : problem_(&problem), metric_(metric) {}

  MetricSpace(const P& problem, DistanceMetric metric,
              const EvaluationLedger<genotype_type>& ledger)
      : problem_(&problem), metric_(metric) {
    if (uses_both()) calibrate(ledger);
  }

  const P& problem() const noexcept { return *problem_; }
  const DistanceMetric& metric() const noexcept { return metric_; }
  double genotypic_scale() const noexcept { return geno_scale_; }
  double phenotypic_scale() const noexcept { return pheno_scale_; }

  bool needs_behavior() const noexcept {
    return metric_.kind == MetricKind::phenotypic ||
           (metric_.kind == MetricKind::blended && metric_.lambda < 1.0);
  }

  Query<genotype_type> query(const genotype_type& g) const {
    Query<genotype_type> q{&g, {}};
    if (needs_behavior()) q.behavior = problem_->behavior(g);
    return q;
  }

  // a query only points at its genotype
  Query<genotype_type> query(genotype_type&&) const = delete;

  Query<genotype_type> query(const ScoredSample<genotype_type>& s) const {
    return Query<genotype_type>{&s.genotype, s.behavior};
  }

  double distance(const Query<genotype_type>& x, const ScoredSample<genotype_type>& s) const {
    return distance(*x.genotype, x.behavior, s.genotype, s.behavior);
  }

  double distance(const genotype_type& a, std::span<const double> ba, const genotype_type& b,
                  std::span<const double> bb) const {
    switch (metric_.kind) {
      case MetricKind::genotypic:
        return problem_->genotypic_distance(a, b);
      case MetricKind::phenotypic:
        return problem_->behavioral_distance(ba, bb);
      case MetricKind::blended:
        break;
    }
    if (metric_.lambda == 1.0) return problem_->genotypic_distance(a, b);
    if (metric_.lambda == 0.0) return problem_->behavioral_distance(ba, bb);
    return metric_.lambda * problem_->genotypic_distance(a, b) / geno_scale_ +
           (1.0 - metric_.lambda) * problem_->behavioral_distance(ba, bb) / pheno_scale_;
  }

 private:
  bool uses_both() const noexcept {
    return metric_.kind == MetricKind::blended && metric_.lambda > 0.0 && metric_.lambda < 1.0;
  }

  void calibrate(const EvaluationLedger<genotype_type>& ledger) {
    const std::size_t n = ledger.size();
    if (n < 2) return;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    constexpr std::size_t kMaxPairs = 1000;
    if (n * (n - 1) / 2 <= kMaxPairs) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    } else {
      Rng rng(0x5eedfaceULL);
      while (pairs.size() < kMaxPairs) {
        const std::size_t i = uniform_index(rng, n);
        const std::size_t j = uniform_index(rng, n);
        if (i != j) pairs.emplace_back(i, j);
      }
    }
    std::vector<double> dg, dp;
    dg.reserve(pairs.size());
    dp.reserve(pairs.size());
    for (auto [i, j] : pairs) {
      dg.push_back(problem_->genotypic_distance(ledger[i].genotype, ledger[j].genotype));
      dp.push_back(problem_->behavioral_distance(ledger[i].behavior, ledger[j].behavior));
    }
    geno_scale_ = positive_median(dg);
    pheno_scale_ = positive_median(dp);
  }

  static double positive_median(std::vector<double>& v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double m = *mid;
    return (m > 0.0 && std::isfinite(m)) ? m : 1.0;
  }

  const P* problem_;
  DistanceMetric metric_;
  double geno_scale_ = 1.0;
  double pheno_scale_ = 1.0;
};

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Exact k nearest neighbors, ascending by distance with ties broken by id.
template <Problem P>
std::vector<Neighbor> knn(const Query<typename P::genotype_type>& x,
                          const EvaluationLedger<typename P::genotype_type>& ledger, std::size_t k,
                          const MetricSpace<P>& space) {
  if (ledger.empty()) throw EmptyLedger();
  std::vector<Neighbor> all(ledger.size());
  for (std::size_t i = 0; i < ledger.size(); ++i) all[i] = {i, space.distance(x, ledger[i])};
  const std::size_t m = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.distance != b.distance) return a.distance < b.distance;
                      return a.index < b.index;
                    });
  all.resize(m);
  return all;
}

template <Problem P>
std::vector<Neighbor> knn(const typename P::genotype_type& x,
                          const EvaluationLedger<typename P::genotype_type>& ledger, std::size_t k,
                          const MetricSpace<P>& space) {
  return knn(space.query(x), ledger, k, space);
}

}  // namespace infoevo
