#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/random.hpp"

namespace infoevo::domains {

using Bits = std::vector<std::uint8_t>;

inline double score_onemax(const Bits& bits) {
  double ones = 0.0;
  for (auto b : bits) ones += b;
  return ones;
}

/// Concatenated deceptive trap: each block scores `block` when all ones,
/// otherwise block - 1 - ones.
inline double score_trap(const Bits& bits, std::size_t block = 5) {
  if (block == 0 || bits.size() % block != 0)
    throw BadLength("trap needs a length divisible by " + std::to_string(block));
  double total = 0.0;
  for (std::size_t start = 0; start < bits.size(); start += block) {
    std::size_t ones = 0;
    for (std::size_t i = start; i < start + block; ++i) ones += bits[i];
    total += ones == block ? static_cast<double>(block) : static_cast<double>(block - 1 - ones);
  }
  return total;
}

enum class BitObjective { onemax, trap };

/// Fixed-length bitstring problems. The phenotype is the expressed bit vector,
/// so reading it never costs an evaluation.
class BitStringProblem {
 public:
  using genotype_type = Bits;

  BitStringProblem(BitObjective objective, std::size_t bits, std::size_t block = 5)
      : objective_(objective), bits_(bits), block_(block) {
    if (bits == 0) throw BadLength("bitstring length must be positive");
    if (objective == BitObjective::trap && bits % block != 0)
      throw BadLength("trap needs a length divisible by " + std::to_string(block));
  }

  static BitStringProblem onemax(std::size_t bits) { return {BitObjective::onemax, bits}; }
  static BitStringProblem trap(std::size_t bits, std::size_t block = 5) {
    return {BitObjective::trap, bits, block};
  }

  std::string name() const { return objective_ == BitObjective::onemax ? "onemax" : "trap"; }
  std::size_t length() const noexcept { return bits_; }
  std::size_t arity() const noexcept { return 1; }
  BitStringProblem restricted(const std::vector<std::size_t>&) const { return *this; }

  double score(const Bits& g) const {
    if (g.size() != bits_) throw DomainMismatch("bitstring of wrong length");
    return objective_ == BitObjective::onemax ? score_onemax(g) : score_trap(g, block_);
  }

  std::optional<double> target() const { return static_cast<double>(bits_); }

  std::string key(const Bits& g) const { return std::string(g.begin(), g.end()); }

  std::string render(const Bits& g) const {
    std::string s;
    s.reserve(g.size());
    for (auto b : g) s.push_back(b ? '1' : '0');
    return s;
  }

  Bits random_genotype(Rng& rng) const {
    Bits g(bits_);
    std::bernoulli_distribution coin(0.5);
    for (auto& b : g) b = coin(rng) ? 1 : 0;
    return g;
  }

  /// Independent per-bit flips with probability `rate`.
  Bits mutate(const Bits& g, double rate, Rng& rng) const {
    Bits out = g;
    if (rate <= 0.0) return out;
    for (auto& b : out)
      if (bernoulli(rng, rate)) b ^= 1;
    return out;
  }

  /// Uniform crossover.
  Bits crossover(const Bits& a, const Bits& b, Rng& rng) const {
    Bits out = a;
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (coin(rng)) out[i] = b[i];
    return out;
  }

  std::vector<int> loci(const Bits& g) const { return {g.begin(), g.end()}; }
  std::vector<int> locus_alphabet() const { return std::vector<int>(bits_, 2); }

  Bits sample_loci(const Marginals& marginals, Rng& rng) const {
    Bits g(bits_);
    for (std::size_t i = 0; i < bits_; ++i) g[i] = bernoulli(rng, marginals[i][1]) ? 1 : 0;
    return g;
  }

  double genotypic_distance(const Bits& a, const Bits& b) const {
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return static_cast<double>(d);
  }

  std::vector<double> behavior(const Bits& g) const { return {g.begin(), g.end()}; }

  double behavioral_distance(std::span<const double> a, std::span<const double> b) const {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
  }

 private:
  BitObjective objective_;
  std::size_t bits_;
  std::size_t block_;
};

}  // namespace infoevo::domains
