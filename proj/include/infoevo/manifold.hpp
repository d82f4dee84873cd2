#pragma once

// The space of probability distributions over a finite evaluated population,
// represented by log-probability vectors phi with sum(exp(phi)) == 1.
//
// Fisher-Rao geometry is computed through the embedding p -> 2*sqrt(p), which
// maps the simplex isometrically onto the positive part of the radius-2 sphere.
// Geodesics become great-circle arcs, so distances and exp/log maps are exact.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "infoevo/error.hpp"

namespace infoevo {

/// Per-coordinate probability floor applied before taking logs.
inline constexpr double kProbabilityFloor = 1e-9;
inline constexpr double kMassTolerance = 1e-10;

class LogDistribution {
 public:
  LogDistribution() = default;

  const std::vector<double>& phi() const noexcept { return phi_; }
  std::size_t size() const noexcept { return phi_.size(); }
  double operator[](std::size_t i) const noexcept { return phi_[i]; }
  double prob(std::size_t i) const noexcept { return std::exp(phi_[i]); }

  std::vector<double> probabilities() const {
    std::vector<double> p(phi_.size());
    std::transform(phi_.begin(), phi_.end(), p.begin(), [](double x) { return std::exp(x); });
    return p;
  }

  friend bool operator==(const LogDistribution&, const LogDistribution&) = default;

 private:
  explicit LogDistribution(std::vector<double> phi) : phi_(std::move(phi)) {}
  friend LogDistribution from_weights(std::span<const double> w, double floor);

  std::vector<double> phi_;
};

/// A tangent vector in log coordinates. Only meaningful together with the base
/// point it was built for; the operations below take that base explicitly.
struct TangentVector {
  std::vector<double> f;

  std::size_t size() const noexcept { return f.size(); }
  friend bool operator==(const TangentVector&, const TangentVector&) = default;
};

/// Builds the distribution p_i proportional to max(w_i, floor * sum(w)).
/// A floor of 0 is accepted as the unfloored limit (zero weights map to -inf).
inline LogDistribution from_weights(std::span<const double> w, double floor = kProbabilityFloor) {
  if (w.empty()) throw AllZeroWeights();
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) throw NegativeWeight(i);
    total += w[i];
  }
  if (!(total > 0.0)) throw AllZeroWeights();
  const double min_weight = floor * total;
  std::vector<double> p(w.size());
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    p[i] = std::max(w[i], min_weight);
    z += p[i];
  }
  for (auto& x : p) x = std::log(x / z);
  return LogDistribution(std::move(p));
}

inline LogDistribution from_weights(const std::vector<double>& w, double floor = kProbabilityFloor) {
  return from_weights(std::span<const double>(w), floor);
}

inline LogDistribution uniform_distribution(std::size_t n) {
  return from_weights(std::vector<double>(n, 1.0));
}

/// F(phi) = sum_i exp(phi_i).
inline double mass(std::span<const double> phi) {
  double s = 0.0;
  for (double x : phi) s += std::exp(x);
  return s;
}

inline double mass(const LogDistribution& d) { return mass(std::span<const double>(d.phi())); }

namespace detail {
inline void check_length(std::size_t expected, std::size_t got) {
  if (expected != got) throw LengthMismatch(expected, got);
}

inline std::vector<double> sqrt_probabilities(const LogDistribution& d) {
  std::vector<double> a(d.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(0.5 * d[i]);
  return a;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

/// <f, g>_phi = sum_i f_i g_i exp(phi_i).
inline double inner(const LogDistribution& base, std::span<const double> f,
                    std::span<const double> g) {
  detail::check_length(base.size(), f.size());
  detail::check_length(base.size(), g.size());
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i] * std::exp(base[i]);
  return s;
}

inline double inner(const LogDistribution& base, const TangentVector& u, const TangentVector& v) {
  return inner(base, std::span<const double>(u.f), std::span<const double>(v.f));
}

inline double norm(const LogDistribution& base, const TangentVector& v) {
  return std::sqrt(std::max(0.0, inner(base, v, v)));
}

/// dF_phi(f) = <f, 1>_phi. The gradient of F under <,>_phi is the all-ones vector.
inline double differential_F(const LogDistribution& base, std::span<const double> f) {
  const std::vector<double> ones(f.size(), 1.0);
  return inner(base, f, std::span<const double>(ones));
}

/// Removes the component along the all-ones normal: f - <f,1>_phi * 1.
inline TangentVector project_tangent(const LogDistribution& base, std::span<const double> f) {
  const double c = differential_F(base, f);
  TangentVector v{std::vector<double>(f.begin(), f.end())};
  for (auto& x : v.f) x -= c;
  // second pass removes the residual left by rounding in the first
  const double r = differential_F(base, v.f);
  for (auto& x : v.f) x -= r;
  return v;
}

/// Fisher-Rao distance 2*arccos(sum_i sqrt(p_i q_i)), evaluated through the
/// chord |sqrt(p) - sqrt(q)| to stay accurate for nearby points.
inline double geodesic_distance_exact(const LogDistribution& a, const LogDistribution& b) {
  detail::check_length(a.size(), b.size());
  double chord2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::exp(0.5 * a[i]) - std::exp(0.5 * b[i]);
    chord2 += d * d;
  }
  const double half_chord = std::min(1.0, 0.5 * std::sqrt(chord2));
  return 4.0 * std::asin(half_chord);
}

/// Follows the geodesic from `base` with initial velocity `v` for time `t`
/// (arc length t * |v|). Coordinates that leave the positive orthant are
/// clamped to the probability floor.
inline LogDistribution exp_map(const LogDistribution& base, const TangentVector& v, double t) {
  detail::check_length(base.size(), v.size());
  if (t == 0.0) return base;
  const double speed = norm(base, v);
  if (!(speed > 0.0)) throw ZeroTangent();
  const double arc = t * speed;

  const std::vector<double> a = detail::sqrt_probabilities(base);
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = a[i] * v.f[i];
  const double along = detail::dot(a, w);
  for (std::size_t i = 0; i < a.size(); ++i) w[i] -= along * a[i];
  const double wn = std::sqrt(detail::dot(w, w));
  if (!(wn > 0.0)) throw ZeroTangent();

  // unit sphere angle is half the arc length on the radius-2 sphere
  const double c = std::cos(0.5 * arc);
  const double s = std::sin(0.5 * arc);
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = std::max(0.0, a[i] * c + s * w[i] / wn);
    p[i] = x * x;
  }
  return from_weights(p);
}

/// Inverse of exp_map on the positive orthant: exp_map(base, log_map(base, target), 1) == target
/// and |log_map(base, target)|_phi == geodesic_distance_exact(base, target).
inline TangentVector log_map(const LogDistribution& base, const LogDistribution& target) {
  detail::check_length(base.size(), target.size());
  const std::size_t n = base.size();
  const std::vector<double> a = detail::sqrt_probabilities(base);
  const std::vector<double> b = detail::sqrt_probabilities(target);
  TangentVector v{std::vector<double>(n, 0.0)};

  double chord2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) chord2 += (b[i] - a[i]) * (b[i] - a[i]);
  const double theta = 2.0 * std::asin(std::min(1.0, 0.5 * std::sqrt(chord2)));
  if (theta == 0.0) return v;

  const double c = std::cos(theta);
  std::vector<double> dir(n);
  for (std::size_t i = 0; i < n; ++i) dir[i] = b[i] - c * a[i];
  const double along = detail::dot(a, dir);
  for (std::size_t i = 0; i < n; ++i) dir[i] -= along * a[i];
  const double dn = std::sqrt(detail::dot(dir, dir));
  if (!(dn > 0.0)) return v;

  const double length = 2.0 * theta;
  for (std::size_t i = 0; i < n; ++i) v.f[i] = length * dir[i] / dn / a[i];
  return v;
}

/// Point at fraction `t` in [0, 1] of the geodesic segment from a to b.
inline LogDistribution geodesic_interpolate(const LogDistribution& a, const LogDistribution& b,
                                            double t) {
  if (t <= 0.0) return a;
  if (t >= 1.0) return b;
  const TangentVector v = log_map(a, b);
  if (!(norm(a, v) > 0.0)) return a;
  return exp_map(a, v, t);
}

}  // namespace infoevo
