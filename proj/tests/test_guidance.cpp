#include <cmath>

#include <gtest/gtest.h>

#include "infoevo/guidance.hpp"
#include "infoevo/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace infoevo;
using domains::Bits;
using domains::BitStringProblem;

namespace {

const BitStringProblem kProblem = BitStringProblem::onemax(8);
const MetricSpace<BitStringProblem> kSpace(kProblem, DistanceMetric::genotypic());

Bits bits_of(std::size_t i, std::size_t n = 8) {
  Bits g(n, 0);
  for (std::size_t b = 0; b < n; ++b) g[b] = (i >> b) & 1U;
  return g;
}

/// Guidance whose modified fitness equals the normalized score.
ModifiedPromise score_only(std::size_t n) {
  return {uniform_distribution(n), uniform_distribution(n), {}, {HKind::weighted_sum, 1.0}, false};
}

FilterPolicy genotypic_policy(std::size_t k, double q) {
  return {k, q, DistanceMetric::genotypic()};
}

}  // namespace

TEST(OmegaKnn, FullNeighborhoodIsTotalMass) {
  const auto ledger = testutil::ledger_with_scores(kProblem, std::vector<double>(10, 0.0));
  Rng rng(3);
  const auto dist = testutil::random_distribution(rng, 10);
  const Bits g = bits_of(200);
  EXPECT_NEAR(omega_knn(kSpace.query(g), dist, ledger, 10, kSpace), 1.0, 1e-12);
}

TEST(OmegaKnn, UniformIsKOverN) {
  const auto ledger = testutil::ledger_with_scores(kProblem, std::vector<double>(10, 0.0));
  const Bits g = bits_of(77);
  EXPECT_NEAR(omega_knn(kSpace.query(g), uniform_distribution(10), ledger, 3, kSpace), 0.3, 1e-12);
}

TEST(OmegaKnn, SumsNeighborMasses) {
  // query 0 has neighbors 0 (d 0), 1 and 2 (d 1); 3 is at distance 2
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 0, 0, 0});
  const auto dist = from_weights(std::vector<double>{0.1, 0.2, 0.3, 0.4}, 0.0);
  const Bits g = bits_of(0);
  EXPECT_NEAR(omega_knn(kSpace.query(g), dist, ledger, 3, kSpace), 0.6, 1e-12);
}

TEST(OmegaKnn, MonotoneInKAndBounded) {
  const auto ledger = testutil::ledger_with_scores(kProblem, std::vector<double>(20, 0.0));
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto dist = testutil::random_distribution(rng, 20);
    const Bits g = bits_of(uniform_index(rng, 256));
    const auto q = kSpace.query(g);
    double prev = 0.0;
    for (std::size_t k = 1; k <= 20; ++k) {
      const double w = omega_knn(q, dist, ledger, k, kSpace);
      EXPECT_GE(w, prev);
      EXPECT_LE(w, 1.0);
      prev = w;
    }
  }
}

TEST(EmbedCandidate, CoincidentSampleTakesAlmostAllMass) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 0, 0, 0, 0});
  const auto e = embed_candidate(kSpace.query(ledger[2].genotype), ledger, 1, kSpace);
  EXPECT_GT(e.prob(2), 1.0 - 1e-6);
}

TEST(EmbedCandidate, EquidistantNeighborsShareMass) {
  // query 11000000 is one flip from 10000000 and from 01000000
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 0, 0});
  const Bits g = bits_of(3);
  const auto e = embed_candidate(kSpace.query(g), ledger, 2, kSpace);
  EXPECT_NEAR(e.prob(1), 0.5, 1e-8);
  EXPECT_NEAR(e.prob(2), 0.5, 1e-8);
  EXPECT_EQ(e, embed_candidate(kSpace.query(g), ledger, 2, kSpace));
}

TEST(OmegaProjection, Examples) {
  const auto base = uniform_distribution(3);
  const auto target = from_weights(std::vector<double>{0.7, 0.2, 0.1}, 0.0);
  EXPECT_EQ(omega_projection(base, base, target), 0.0);
  EXPECT_NEAR(omega_projection(target, base, target), oracle::kUniform3VsSkewed, 1e-8);
  // reflection of the target through the base lies along -u
  const auto away = exp_map(base, log_map(base, target), -1.0);
  EXPECT_EQ(omega_projection(away, base, target), 0.0);
  EXPECT_THROW(omega_projection(target, base, base), DegenerateLine);
}

TEST(HCombine, Examples) {
  const HForm product{};
  EXPECT_DOUBLE_EQ(h_combine(0.8, 0.0, product), 0.05 * 0.8);
  EXPECT_DOUBLE_EQ(h_combine(1.0, 1.0, product), 1.05);
  const HForm sum{HKind::weighted_sum, 0.25};
  EXPECT_DOUBLE_EQ(h_combine(1.0, 0.0, sum), 0.25);
  EXPECT_DOUBLE_EQ(h_combine(0.0, 1.0, sum), 0.75);
}

TEST(HCombine, MonotoneInBothArguments) {
  Rng rng(10000);
  for (int t = 0; t < 10000; ++t) {
    const HForm h = t % 2 == 0 ? HForm{} : HForm{HKind::weighted_sum, uniform01(rng)};
    const double z1 = 2.0 * uniform01(rng), z2 = z1 + 2.0 * uniform01(rng);
    const double w1 = uniform01(rng), w2 = w1 + (1.0 - w1) * uniform01(rng);
    EXPECT_LE(h_combine(z1, w1, h), h_combine(z2, w1, h));
    EXPECT_LE(h_combine(z1, w1, h), h_combine(z1, w2, h));
    EXPECT_GE(h_combine(z1, w1, h), 0.0);
  }
}

TEST(ScoreScale, ClampsAndHandlesConstantLedgers) {
  const auto s = ScoreScale::of(testutil::ledger_with_scores(kProblem, {2, 4, 6}));
  EXPECT_EQ(s(4), 0.5);
  EXPECT_EQ(s(0), 0.0);
  EXPECT_EQ(s(10), 2.0);
  EXPECT_EQ(ScoreScale::of(testutil::ledger_with_scores(kProblem, {3, 3}))(-7), 1.0);
}

TEST(ModifiedFitness, MatchesGuide) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 1, 2, 3, 4, 5});
  const ModifiedPromise mp{uniform_distribution(6), uniform_distribution(6), {OmegaKind::knn_mass, 2}, {}, false};
  const Guide<BitStringProblem> guide(kProblem, ledger, mp, genotypic_policy(2, 0.25));
  for (std::size_t i = 0; i < ledger.size(); ++i) {
    const double direct = modified_fitness(kSpace.query(ledger[i]), ledger[i].score, mp, ledger, kSpace);
    EXPECT_DOUBLE_EQ(guide.sample_fitness()[i], direct);
    EXPECT_DOUBLE_EQ(direct, (static_cast<double>(i) / 5.0) * (2.0 / 6.0 + 0.05));
  }
}

TEST(ModifiedFitness, UnguidedOmegaIsOne) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 1});
  ModifiedPromise mp{uniform_distribution(2), uniform_distribution(2), {}, {}, true};
  EXPECT_EQ(omega(kSpace.query(ledger[0]), mp, ledger, kSpace), 1.0);
}

TEST(Estimate, InterpolatesAtNodes) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 3, 1, 7, 2, 5, 4, 6, 9, 8});
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(10), genotypic_policy(1, 0.25));
  for (std::size_t i = 0; i < ledger.size(); ++i)
    EXPECT_EQ(estimate_fitness(ledger[i].genotype, guide), guide.sample_fitness()[i]);
  const Guide<BitStringProblem> wide(kProblem, ledger, score_only(10), genotypic_policy(4, 0.25));
  for (std::size_t i = 0; i < ledger.size(); ++i)
    EXPECT_EQ(wide.estimate(ledger[i].genotype), wide.sample_fitness()[i]);
}

TEST(Estimate, ConstantFieldGivesConstant) {
  const auto ledger = testutil::ledger_with_scores(kProblem, std::vector<double>(12, 4.0));
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(12), genotypic_policy(5, 0.25));
  EXPECT_DOUBLE_EQ(guide.estimate(bits_of(201)), 1.0);
}

TEST(Estimate, SymmetricNeighborsAverage) {
  EvaluationLedger<Bits> ledger(2);
  ledger.append(kProblem.key(bits_of(0)), bits_of(0), 0.0, kProblem.behavior(bits_of(0)));
  ledger.append(kProblem.key(bits_of(3)), bits_of(3), 1.0, kProblem.behavior(bits_of(3)));
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(2), genotypic_policy(2, 0.25));
  EXPECT_DOUBLE_EQ(guide.estimate(bits_of(1)), 0.5);
}

TEST(Decide, QuantileZeroNeverSkips) {
  Rng rng(55);
  std::vector<double> scores(40);
  for (auto& s : scores) s = uniform01(rng);
  const auto ledger = testutil::ledger_with_scores(kProblem, scores);
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(40), genotypic_policy(3, 0.0));
  std::vector<Bits> candidates;
  for (std::size_t i = 0; i < 256; ++i) candidates.push_back(bits_of(i));
  for (const auto& d : guide.decide_batch(candidates)) EXPECT_TRUE(d.evaluate);
}

TEST(Decide, DuplicateOfBestIsEvaluated) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {5, 1, 2, 9, 0, 3, 4, 6, 7, 8, 1, 2, 3, 4, 5, 6});
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(16), genotypic_policy(3, 0.5));
  EXPECT_FALSE(guide.cold_start());
  const auto d = should_evaluate(ledger[3].genotype, guide);
  EXPECT_TRUE(d.evaluate);
  EXPECT_EQ(d.estimate, 1.0);
  EXPECT_FALSE(guide.decide(ledger[4].genotype).evaluate);
}

TEST(Decide, ColdStartEvaluates) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {5, 1, 2, 9, 0});
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(5), genotypic_policy(3, 0.9));
  EXPECT_TRUE(guide.cold_start());
  EXPECT_TRUE(guide.decide(ledger[4].genotype).evaluate);
}

TEST(Decide, AcceptanceNonincreasingInQuantile) {
  Rng rng(91);
  std::vector<double> scores(64);
  for (auto& s : scores) s = uniform01(rng);
  const auto ledger = testutil::ledger_with_scores(kProblem, scores);
  std::vector<Bits> candidates;
  for (std::size_t i = 0; i < 256; ++i) candidates.push_back(bits_of(i));
  std::size_t prev = candidates.size() + 1;
  for (double q : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    const Guide<BitStringProblem> guide(kProblem, ledger, score_only(64), genotypic_policy(4, q), 2);
    std::size_t accepted = 0;
    for (const auto& d : guide.decide_batch(candidates)) accepted += d.evaluate;
    EXPECT_LE(accepted, prev);
    prev = accepted;
  }
}

TEST(Decide, ThresholdIsSampleQuantile) {
  const auto ledger = testutil::ledger_with_scores(kProblem, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
  const Guide<BitStringProblem> guide(kProblem, ledger, score_only(16), genotypic_policy(2, 0.25));
  EXPECT_DOUBLE_EQ(guide.threshold(), quantile(guide.sample_fitness(), 0.25));
  EXPECT_DOUBLE_EQ(guide.threshold(), 3.75 / 15.0);
}

TEST(FilterPolicy, Validation) {
  EXPECT_THROW(genotypic_policy(0, 0.5).validate(), ConfigError);
  EXPECT_THROW(genotypic_policy(3, 1.0).validate(), ConfigError);
  EXPECT_THROW(genotypic_policy(3, -0.1).validate(), ConfigError);
}

TEST(Quantile, Type7) {
  EXPECT_EQ(quantile({1, 2, 3, 4}, 0.5), 2.5);
  EXPECT_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile({0, 10}, 0.25), 2.5);
  EXPECT_EQ(median({5}), 5.0);
}

TEST(RankRays, Examples) {
  const PromiseVector pv{{0.0, 1.0, 5.0}};
  const auto uniform = uniform_distribution(3);
  EXPECT_EQ(rank_rays({uniform}, pv), (std::vector<std::size_t>{0}));
  const auto peaked = from_weights(std::vector<double>{0.1, 0.1, 0.8});
  EXPECT_EQ(rank_rays({uniform, peaked}, pv), (std::vector<std::size_t>{1, 0}));
  EXPECT_EQ(rank_rays({uniform, uniform, uniform}, pv), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(rank_rays({uniform_distribution(2)}, pv), LengthMismatch);
}
