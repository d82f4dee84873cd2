#pragma once

// Fisher-Rao distance between programs represented by their outputs on a
// shared probe set.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "infoevo/error.hpp"
#include "infoevo/manifold.hpp"

namespace infoevo {

inline constexpr double kBehaviorSmoothing = 1e-6;

/// Turns an output vector into a point of the simplex: vectors with negative
/// entries are shifted up by their minimum, every entry gets
/// `smoothing * range` added, and the result is normalized. Constant or
/// all-zero vectors map to the uniform distribution.
inline LogDistribution behavior_distribution(std::span<const double> outputs,
                                             double smoothing = kBehaviorSmoothing) {
  if (outputs.empty()) throw AllZeroWeights();
  for (double y : outputs)
    if (!std::isfinite(y)) throw NonFiniteOutput();
  const auto [lo, hi] = std::minmax_element(outputs.begin(), outputs.end());
  const double range = *hi - *lo;
  const double shift = std::min(*lo, 0.0);
  std::vector<double> w(outputs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = outputs[i] - shift + smoothing * range;
    total += w[i];
  }
  if (range == 0.0 || !(total > 0.0)) return uniform_distribution(outputs.size());
  return from_weights(w, 0.0);
}

inline double behavior_fisher_distance(std::span<const double> a, std::span<const double> b,
                                       double smoothing = kBehaviorSmoothing) {
  if (a.size() != b.size()) throw LengthMismatch(a.size(), b.size());
  return geodesic_distance_exact(behavior_distribution(a, smoothing),
                                 behavior_distribution(b, smoothing));
}

}  // namespace infoevo
