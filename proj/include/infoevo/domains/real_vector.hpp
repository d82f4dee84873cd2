#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/random.hpp"

namespace infoevo::domains {

using RealVector = std::vector<double>;

/// Negated sphere, maximized at the origin.
inline double score_sphere(const RealVector& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return -s;
}

/// Negated Rosenbrock, maximized at (1, ..., 1).
inline double score_rosenbrock(const RealVector& x) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    s += 100.0 * a * a + b * b;
  }
  return -s;
}

enum class RealObjective { sphere, rosenbrock };

/// Real vectors in the box [-5, 5]^d. For EDA sampling each coordinate is
/// discretized into 8 equal bins. The phenotype is the point itself.
class RealVectorProblem {
 public:
  using genotype_type = RealVector;

  static constexpr double kLower = -5.0;
  static constexpr double kUpper = 5.0;
  static constexpr int kBins = 8;

  RealVectorProblem(RealObjective objective, std::size_t dim, std::optional<double> target)
      : objective_(objective), dim_(dim), target_(target) {
    if (dim == 0) throw BadLength("dimension must be positive");
  }

  static RealVectorProblem sphere(std::size_t dim, std::optional<double> target = -1e-3) {
    return {RealObjective::sphere, dim, target};
  }
  static RealVectorProblem rosenbrock(std::size_t dim, std::optional<double> target = -1e-3) {
    return {RealObjective::rosenbrock, dim, target};
  }

  std::string name() const { return objective_ == RealObjective::sphere ? "sphere" : "rosenbrock"; }
  std::size_t dimension() const noexcept { return dim_; }
  std::size_t arity() const noexcept { return 1; }
  RealVectorProblem restricted(const std::vector<std::size_t>&) const { return *this; }

  double score(const RealVector& x) const {
    if (x.size() != dim_) throw DomainMismatch("vector of wrong dimension");
    return objective_ == RealObjective::sphere ? score_sphere(x) : score_rosenbrock(x);
  }

  std::optional<double> target() const { return target_; }

  // bit-exact serialization
  std::string key(const RealVector& x) const {
    std::string k(x.size() * sizeof(double), '\0');
    std::memcpy(k.data(), x.data(), k.size());
    return k;
  }

  std::string render(const RealVector& x) const {
    std::ostringstream os;
    os.precision(17);
    os << '[';
    for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ']';
    return os.str();
  }

  RealVector random_genotype(Rng& rng) const {
    std::uniform_real_distribution<double> u(kLower, kUpper);
    RealVector x(dim_);
    for (auto& v : x) v = u(rng);
    return x;
  }

  /// Each coordinate is perturbed with probability `rate` by a Gaussian whose
  /// scale is drawn log-uniformly from [1e-4, 1] so that both coarse and fine
  /// moves occur.
  RealVector mutate(const RealVector& x, double rate, Rng& rng) const {
    RealVector out = x;
    if (rate <= 0.0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> log_scale(-4.0, 0.0);
    for (auto& v : out) {
      if (!bernoulli(rng, rate)) continue;
      const double sigma = std::pow(10.0, log_scale(rng));
      v = std::clamp(v + sigma * normal(rng), kLower, kUpper);
    }
    return out;
  }

  /// Uniform crossover.
  RealVector crossover(const RealVector& a, const RealVector& b, Rng& rng) const {
    RealVector out = a;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (coin(rng)) out[i] = b[i];
    return out;
  }

  static int bin_of(double v) {
    const double width = (kUpper - kLower) / kBins;
    return std::clamp(static_cast<int>(std::floor((v - kLower) / width)), 0, kBins - 1);
  }

  std::vector<int> loci(const RealVector& x) const {
    std::vector<int> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), bin_of);
    return out;
  }

  std::vector<int> locus_alphabet() const { return std::vector<int>(dim_, kBins); }

  /// Samples a bin per coordinate, then a point uniformly inside it.
  RealVector sample_loci(const Marginals& marginals, Rng& rng) const {
    const double width = (kUpper - kLower) / kBins;
    RealVector x(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      const auto bin = static_cast<double>(sample_categorical(rng, marginals[i]));
      x[i] = kLower + width * (bin + uniform01(rng));
    }
    return x;
  }

  double genotypic_distance(const RealVector& a, const RealVector& b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

  std::vector<double> behavior(const RealVector& x) const { return x; }

  double behavioral_distance(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

 private:
  RealObjective objective_;
  std::size_t dim_;
  std::optional<double> target_;
};

}  // namespace infoevo::domains
