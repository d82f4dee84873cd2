#pragma once

// Heuristic promise function over an evaluated population: a weighted blend
// of the normalized score, a local-maximum indicator and a global-maximum
// indicator.

#include <algorithm>
#include <cmath>
#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/manifold.hpp"

namespace infoevo {

struct PromiseWeights {
  double w_zeta = 1.0;
  double w_lm = 0.5;
  double w_gm = 0.5;
  std::size_t k_local = 5;
  double sharpness = 1.0;  // exponent applied to the local/global ratios

  void validate() const {
    if (!(w_zeta >= 0.0 && w_lm >= 0.0 && w_gm >= 0.0))
      throw ConfigError("promise_weights", "weights must be nonnegative");
    if (!(w_zeta + w_lm + w_gm > 0.0))
      throw ConfigError("promise_weights", "at least one weight must be positive");
    if (k_local == 0) throw ConfigError("k_local", "must be positive");
    if (!(sharpness > 0.0)) throw ConfigError("sharpness", "must be positive");
  }
};

struct PromiseVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  /// The induced distribution p_i proportional to values[i].
  LogDistribution distribution() const { return from_weights(values); }
};

/// Min-max rescaling of raw scores into [0, 1]; all-equal scores map to 1.
template <class G>
std::vector<double> normalize_scores(const EvaluationLedger<G>& ledger) {
  if (ledger.empty()) throw EmptyLedger();
  double lo = ledger[0].score, hi = ledger[0].score;
  for (const auto& s : ledger) {
    lo = std::min(lo, s.score);
    hi = std::max(hi, s.score);
  }
  std::vector<double> out(ledger.size(), 1.0);
  if (hi > lo)
    for (std::size_t i = 0; i < ledger.size(); ++i) out[i] = (ledger[i].score - lo) / (hi - lo);
  return out;
}

namespace detail {
inline double ratio(double value, double best, double sharpness) {
  if (!(best > 0.0)) return 1.0;  // nothing in the neighborhood beats value
  const double r = std::clamp(value / best, 0.0, 1.0);
  return sharpness == 1.0 ? r : std::pow(r, sharpness);
}

template <Problem P>
double local_max_prob(std::size_t i, const EvaluationLedger<typename P::genotype_type>& ledger,
                      const std::vector<double>& normalized, std::size_t k_local,
                      const MetricSpace<P>& space, double sharpness) {
  // one extra neighbor because s_i is its own nearest neighbor
  const auto nbrs = knn(space.query(ledger[i]), ledger, k_local + 1, space);
  double best = normalized[i];
  std::size_t used = 0;
  for (const auto& nb : nbrs) {
    if (nb.index == i) continue;
    if (used++ == k_local) break;
    best = std::max(best, normalized[nb.index]);
  }
  return ratio(normalized[i], best, sharpness);
}
}  // namespace detail

/// Ratio of s_i's normalized score to the best normalized score among s_i and
/// its k_local nearest neighbors.
template <Problem P>
double local_max_prob(GenotypeId i, const EvaluationLedger<typename P::genotype_type>& ledger,
                      std::size_t k_local, const MetricSpace<P>& space, double sharpness = 1.0) {
  if (ledger.size() < 2)
    throw LedgerTooSmall("local maximum estimate needs at least two samples");
  return detail::local_max_prob(i.index, ledger, normalize_scores(ledger), k_local, space,
                                sharpness);
}

/// Ratio of s_i's normalized score to the best normalized score overall.
template <class G>
double global_max_prob(GenotypeId i, const EvaluationLedger<G>& ledger, double sharpness = 1.0) {
  const auto normalized = normalize_scores(ledger);
  const double best = *std::max_element(normalized.begin(), normalized.end());
  return detail::ratio(normalized[i.index], best, sharpness);
}

template <Problem P>
PromiseVector promise_vector(const EvaluationLedger<typename P::genotype_type>& ledger,
                             const PromiseWeights& weights, const MetricSpace<P>& space) {
  weights.validate();
  const auto normalized = normalize_scores(ledger);
  const double best = *std::max_element(normalized.begin(), normalized.end());
  if (weights.w_lm > 0.0 && ledger.size() < 2)
    throw LedgerTooSmall("local maximum estimate needs at least two samples");

  PromiseVector pv{std::vector<double>(ledger.size(), 0.0)};
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    double v = weights.w_zeta * normalized[i];
    if (weights.w_lm > 0.0)
      v += weights.w_lm *
           detail::local_max_prob(i, ledger, normalized, weights.k_local, space, weights.sharpness);
    if (weights.w_gm > 0.0)
      v += weights.w_gm * detail::ratio(normalized[i], best, weights.sharpness);
    pv.values[i] = v;
  }
  return pv;
}

}  // namespace infoevo
