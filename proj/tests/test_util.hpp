#pragma once

#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/domains/bitstring.hpp"
#include "infoevo/manifold.hpp"
#include "infoevo/random.hpp"

namespace testutil {

/// Interior distribution with probabilities bounded away from zero.
inline infoevo::LogDistribution random_distribution(infoevo::Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& x : w) x = 0.05 + infoevo::uniform01(rng);
  return infoevo::from_weights(w);
}

inline infoevo::TangentVector random_tangent(infoevo::Rng& rng, const infoevo::LogDistribution& base) {
  return infoevo::project_tangent(base, infoevo::gaussian_vector(rng, base.size()));
}

inline std::vector<double> probs(std::initializer_list<double> p) { return p; }

/// Distinct `bits`-long genotypes (binary encodings of the index) carrying the given scores.
inline infoevo::EvaluationLedger<infoevo::domains::Bits> ledger_with_scores(
    const infoevo::domains::BitStringProblem& problem, const std::vector<double>& scores) {
  infoevo::EvaluationLedger<infoevo::domains::Bits> ledger(scores.size());
  const std::size_t bits = problem.length();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    infoevo::domains::Bits g(bits, 0);
    for (std::size_t b = 0; b < bits; ++b) g[b] = (i >> b) & 1U;
    ledger.append(problem.key(g), g, scores[i], problem.behavior(g));
  }
  return ledger;
}

}  // namespace testutil
