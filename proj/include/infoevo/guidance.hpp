#pragma once

// Modified promise functions h(zeta, omega) built from a stepped distribution,
// kNN fitness estimation for unevaluated candidates, and the evaluation filter.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/manifold.hpp"
#include "infoevo/promise.hpp"
#include "infoevo/stats.hpp"

namespace infoevo {

enum class OmegaKind { knn_mass, projection };

struct OmegaSpec {
  OmegaKind kind = OmegaKind::knn_mass;
  std::size_t k = 7;  // neighbors summed (knn_mass) or used for the embedding (projection)
};

enum class HKind { product, weighted_sum };

inline constexpr double kOmegaBaseline = 0.05;

struct HForm {
  HKind kind = HKind::product;
  double alpha = 0.5;  // weight of zeta in the weighted sum
  double omega0 = kOmegaBaseline;
};

/// h(zeta, omega): product zeta * (omega + omega0) or alpha * zeta + (1 - alpha) * omega.
/// Nondecreasing in both arguments and nonnegative for nonnegative inputs.
inline double h_combine(double zeta_norm, double omega, const HForm& h) {
  if (h.kind == HKind::product) return zeta_norm * (omega + h.omega0);
  return h.alpha * zeta_norm + (1.0 - h.alpha) * omega;
}

struct ModifiedPromise {
  LogDistribution base_promise;  // distribution induced by the promise vector
  LogDistribution target;        // stepped distribution of this sub-deme
  OmegaSpec omega;
  HForm h;
  bool unguided = false;  // omega fixed at 1; used by the baseline mode
};

struct FilterPolicy {
  std::size_t k = 7;
  double threshold_quantile = 0.25;
  DistanceMetric metric = DistanceMetric::blended(0.5);

  void validate() const {
    if (k == 0) throw ConfigError("filter.k", "must be positive");
    if (!(threshold_quantile >= 0.0 && threshold_quantile < 1.0))
      throw ConfigError("filter.threshold_quantile", "must lie in [0, 1)");
  }
};

namespace detail {
/// Inverse-distance weights with the zero-distance limit taken exactly: if any
/// neighbor coincides with the query, only coincident neighbors get weight.
inline std::vector<double> inverse_distance_weights(const std::vector<Neighbor>& nbrs) {
  std::vector<double> w(nbrs.size(), 0.0);
  if (nbrs.empty()) return w;
  if (nbrs.front().distance == 0.0) {
    for (std::size_t j = 0; j < nbrs.size(); ++j) w[j] = nbrs[j].distance == 0.0 ? 1.0 : 0.0;
    return w;
  }
  std::vector<double> ds(nbrs.size());
  std::transform(nbrs.begin(), nbrs.end(), ds.begin(), [](const Neighbor& n) { return n.distance; });
  const double delta = 1e-9 * (median(ds) + 1e-30);
  for (std::size_t j = 0; j < nbrs.size(); ++j) w[j] = 1.0 / (nbrs[j].distance + delta);
  return w;
}
}  // namespace detail

/// Total probability under `dist` of the k ledger samples nearest to x.
template <Problem P>
double omega_knn(const Query<typename P::genotype_type>& x, const LogDistribution& dist,
                 const EvaluationLedger<typename P::genotype_type>& ledger, std::size_t k,
                 const MetricSpace<P>& space) {
  if (dist.size() != ledger.size()) throw LengthMismatch(ledger.size(), dist.size());
  double total = 0.0;
  for (const auto& nb : knn(x, ledger, k, space)) total += dist.prob(nb.index);
  return std::min(total, 1.0);
}

/// Places x in the simplex over the ledger: mass on its k nearest samples
/// proportional to 1 / (distance + delta), with delta = 1e-9 * (median
/// neighbor distance + 1e-30), then floored and normalized.
template <Problem P>
LogDistribution embed_candidate(const Query<typename P::genotype_type>& x,
                                const EvaluationLedger<typename P::genotype_type>& ledger,
                                std::size_t k, const MetricSpace<P>& space) {
  const auto nbrs = knn(x, ledger, k, space);
  std::vector<double> ds(nbrs.size());
  std::transform(nbrs.begin(), nbrs.end(), ds.begin(), [](const Neighbor& n) { return n.distance; });
  const double delta = 1e-9 * (median(ds) + 1e-30);
  std::vector<double> w(ledger.size(), 0.0);
  for (const auto& nb : nbrs) w[nb.index] = 1.0 / (nb.distance + delta);
  return from_weights(w);
}

/// Embedding-level projection: max(0, <log(base, e), u>) with u the unit
/// tangent from base toward target.
inline double omega_projection(const LogDistribution& embedded, const LogDistribution& base,
                               const LogDistribution& target) {
  if (geodesic_distance_exact(base, target) == 0.0) throw DegenerateLine();
  const TangentVector u = log_map(base, target);
  const TangentVector e = log_map(base, embedded);
  return std::max(0.0, inner(base, e, u) / norm(base, u));
}

template <Problem P>
double omega_projection(const Query<typename P::genotype_type>& x, const ModifiedPromise& mp,
                        const EvaluationLedger<typename P::genotype_type>& ledger, std::size_t k,
                        const MetricSpace<P>& space) {
  return omega_projection(embed_candidate(x, ledger, k, space), mp.base_promise, mp.target);
}

template <Problem P>
double omega(const Query<typename P::genotype_type>& x, const ModifiedPromise& mp,
             const EvaluationLedger<typename P::genotype_type>& ledger, const MetricSpace<P>& space) {
  if (mp.unguided) return 1.0;
  if (mp.omega.kind == OmegaKind::knn_mass) return omega_knn(x, mp.target, ledger, mp.omega.k, space);
  return omega_projection(x, mp, ledger, mp.omega.k, space);
}

/// Score rescaled against the ledger's min and max; below-min scores clamp to 0
/// and a constant ledger maps every score to 1.
struct ScoreScale {
  double lo = 0.0;
  double hi = 0.0;

  template <class G>
  static ScoreScale of(const EvaluationLedger<G>& ledger) {
    if (ledger.empty()) throw EmptyLedger();
    ScoreScale s{ledger[0].score, ledger[0].score};
    for (const auto& x : ledger) {
      s.lo = std::min(s.lo, x.score);
      s.hi = std::max(s.hi, x.score);
    }
    return s;
  }

  double operator()(double score) const {
    if (!(hi > lo)) return 1.0;
    return std::max(0.0, (score - lo) / (hi - lo));
  }
};

template <Problem P>
double modified_fitness(const Query<typename P::genotype_type>& x, double zeta_value,
                        const ModifiedPromise& mp,
                        const EvaluationLedger<typename P::genotype_type>& ledger,
                        const MetricSpace<P>& space) {
  const double z = ScoreScale::of(ledger)(zeta_value);
  return h_combine(z, omega(x, mp, ledger, space), mp.h);
}

struct Decision {
  bool evaluate = true;
  double estimate = 0.0;
};

/// Guidance bound to one working population and one modified promise.
/// Modified fitness of every population member and the skip threshold are
/// computed once, so all decisions in a generation see one snapshot.
template <Problem P>
class Guide {
 public:
  using genotype_type = typename P::genotype_type;

  Guide(const P& problem, const EvaluationLedger<genotype_type>& population, ModifiedPromise mp,
        FilterPolicy policy, std::size_t threads = 1)
      : population_(&population),
        space_(problem, policy.metric, population),
        mp_(std::move(mp)),
        policy_(policy),
        scale_(ScoreScale::of(population)),
        threads_(std::max<std::size_t>(threads, 1)) {
    policy_.validate();
    if (mp_.base_promise.size() != population.size())
      throw LengthMismatch(population.size(), mp_.base_promise.size());
    if (mp_.target.size() != population.size())
      throw LengthMismatch(population.size(), mp_.target.size());
    fitness_.resize(population.size());
    parallel_for(population.size(), [&](std::size_t i) {
      const auto& s = population[i];
      fitness_[i] = h_combine(scale_(s.score), omega(space_.query(s), mp_, population, space_), mp_.h);
    });
    cold_ = population.size() < 2 * policy_.k;
    threshold_ = quantile(fitness_, policy_.threshold_quantile);
  }

  const MetricSpace<P>& space() const noexcept { return space_; }
  const ModifiedPromise& promise() const noexcept { return mp_; }
  const FilterPolicy& policy() const noexcept { return policy_; }
  const EvaluationLedger<genotype_type>& population() const noexcept { return *population_; }
  const std::vector<double>& sample_fitness() const noexcept { return fitness_; }
  double threshold() const noexcept { return threshold_; }
  bool cold_start() const noexcept { return cold_; }

  double zeta_norm(double score) const { return scale_(score); }

  double omega_of(const Query<genotype_type>& x) const { return omega(x, mp_, *population_, space_); }

  double fitness(const Query<genotype_type>& x, double score) const {
    return h_combine(scale_(score), omega_of(x), mp_.h);
  }

  double fitness(const genotype_type& g, double score) const { return fitness(space_.query(g), score); }

  /// Inverse-distance average of population modified fitness over x's k
  /// nearest samples.
  double estimate(const Query<genotype_type>& x) const {
    const auto nbrs = knn(x, *population_, policy_.k, space_);
    const auto w = detail::inverse_distance_weights(nbrs);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < nbrs.size(); ++j) {
      num += w[j] * fitness_[nbrs[j].index];
      den += w[j];
    }
    return num / den;
  }

  double estimate(const genotype_type& g) const { return estimate(space_.query(g)); }

  Decision decide(const genotype_type& g) const {
    const double est = estimate(g);
    if (cold_ || policy_.threshold_quantile == 0.0) return {true, est};
    return {!(est < threshold_), est};
  }

  std::vector<Decision> decide_batch(const std::vector<genotype_type>& candidates) const {
    std::vector<Decision> out(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t i) { out[i] = decide(candidates[i]); });
    return out;
  }

 private:
  template <class F>
  void parallel_for(std::size_t n, F&& body) const {
    const std::size_t workers = std::min(threads_, n);
    if (workers <= 1) {
      for (std::size_t i = 0; i < n; ++i) body(i);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers) body(i);
      });
    for (auto& t : pool) t.join();
  }

  const EvaluationLedger<genotype_type>* population_;
  MetricSpace<P> space_;
  ModifiedPromise mp_;
  FilterPolicy policy_;
  ScoreScale scale_;
  std::size_t threads_;
  std::vector<double> fitness_;
  double threshold_ = 0.0;
  bool cold_ = true;
};

template <Problem P>
double estimate_fitness(const typename P::genotype_type& x, const Guide<P>& guide) {
  return guide.estimate(x);
}

template <Problem P>
Decision should_evaluate(const typename P::genotype_type& x, const Guide<P>& guide) {
  return guide.decide(x);
}

/// Candidate indices ordered by expected promise sum_i p_i * promise_i,
/// descending, ties kept in input order.
inline std::vector<std::size_t> rank_rays(const std::vector<LogDistribution>& candidates,
                                          const PromiseVector& promise) {
  std::vector<double> expected(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].size() != promise.size())
      throw LengthMismatch(promise.size(), candidates[c].size());
    for (std::size_t i = 0; i < promise.size(); ++i) expected[c] += candidates[c].prob(i) * promise[i];
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return expected[a] > expected[b]; });
  return order;
}

}  // namespace infoevo
