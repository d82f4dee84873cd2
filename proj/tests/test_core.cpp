#include <gtest/gtest.h>

#include "infoevo/core.hpp"
#include "infoevo/domains/bitstring.hpp"
#include "test_util.hpp"

using namespace infoevo;
using domains::Bits;
using domains::BitStringProblem;

TEST(Evaluate, MemoizesAndCountsOnce) {
  const auto p = BitStringProblem::onemax(50);
  EvaluationLedger<Bits> ledger(10);
  const Bits ones(50, 1);
  EXPECT_EQ(evaluate(ones, p, ledger).score, 50.0);
  EXPECT_EQ(ledger.eval_count(), 1u);
  const auto& again = evaluate(ones, p, ledger);
  EXPECT_EQ(again.id.index, 0u);
  EXPECT_EQ(ledger.eval_count(), 1u);
}

TEST(Evaluate, FullLedgerThrows) {
  const auto p = BitStringProblem::onemax(4);
  EvaluationLedger<Bits> ledger(1);
  evaluate(Bits{0, 0, 0, 0}, p, ledger);
  EXPECT_THROW(evaluate(Bits{1, 0, 0, 0}, p, ledger), BudgetExhausted);
  // a known genotype is still free
  EXPECT_NO_THROW(evaluate(Bits{0, 0, 0, 0}, p, ledger));
}

TEST(Evaluate, EvalOrderIsDense) {
  const auto p = BitStringProblem::onemax(3);
  EvaluationLedger<Bits> ledger(8);
  evaluate(Bits{1, 0, 0}, p, ledger);
  evaluate(Bits{0, 1, 0}, p, ledger);
  evaluate(Bits{1, 0, 0}, p, ledger);
  evaluate(Bits{0, 0, 1}, p, ledger);
  ASSERT_EQ(ledger.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ledger[i].eval_order, i);
    EXPECT_EQ(ledger[i].id.index, i);
  }
}

TEST(BestScore, Examples) {
  const auto p = BitStringProblem::onemax(4);
  EXPECT_EQ(best_score(testutil::ledger_with_scores(p, {1, 5, 3})), 5.0);
  EXPECT_EQ(best_score(testutil::ledger_with_scores(p, {-2})), -2.0);
  EXPECT_EQ(best_score(testutil::ledger_with_scores(p, {7, 7, 7})), 7.0);
  EXPECT_EQ(best_index(testutil::ledger_with_scores(p, {1, 5, 5})), 1u);
  EXPECT_THROW(best_score(EvaluationLedger<Bits>(3)), EmptyLedger);
}

TEST(Knn, SelfIsNearest) {
  const auto p = BitStringProblem::onemax(6);
  const auto ledger = testutil::ledger_with_scores(p, {0, 1, 2, 3, 4});
  const MetricSpace<BitStringProblem> space(p, DistanceMetric::genotypic());
  const auto nb = knn(ledger[3].genotype, ledger, 1, space);
  ASSERT_EQ(nb.size(), 1u);
  EXPECT_EQ(nb[0].index, 3u);
  EXPECT_EQ(nb[0].distance, 0.0);
}

TEST(Knn, OneBitHamming) {
  const auto p = BitStringProblem::onemax(1);
  const auto ledger = testutil::ledger_with_scores(p, {0, 1});
  const MetricSpace<BitStringProblem> space(p, DistanceMetric::genotypic());
  const auto nb = knn(Bits{0}, ledger, 2, space);
  ASSERT_EQ(nb.size(), 2u);
  EXPECT_EQ(nb[0].distance, 0.0);
  EXPECT_EQ(nb[1].distance, 1.0);
}

TEST(Knn, ClampsToLedgerSize) {
  const auto p = BitStringProblem::onemax(5);
  const auto ledger = testutil::ledger_with_scores(p, {0, 1, 2, 3, 4});
  const MetricSpace<BitStringProblem> space(p, DistanceMetric::genotypic());
  EXPECT_EQ(knn(Bits(5, 1), ledger, 10, space).size(), 5u);
  EXPECT_THROW(knn(Bits(5, 1), EvaluationLedger<Bits>(1), 1, space), EmptyLedger);
}

TEST(Knn, TiesBrokenById) {
  const auto p = BitStringProblem::onemax(2);
  // genotypes 00, 10, 01: both 10 and 01 are one flip from 00
  const auto ledger = testutil::ledger_with_scores(p, {0, 0, 0});
  const MetricSpace<BitStringProblem> space(p, DistanceMetric::genotypic());
  const auto nb = knn(Bits{1, 1}, ledger, 3, space);
  EXPECT_EQ(nb[0].index, 1u);
  EXPECT_EQ(nb[1].index, 2u);
  EXPECT_EQ(nb[2].index, 0u);
}

TEST(MetricSpace, BlendedIsScaleFree) {
  const auto p = BitStringProblem::onemax(8);
  const auto ledger = testutil::ledger_with_scores(p, {0, 1, 2, 3, 4, 5, 6, 7});
  const MetricSpace<BitStringProblem> space(p, DistanceMetric::blended(0.5), ledger);
  EXPECT_GT(space.genotypic_scale(), 0.0);
  EXPECT_GT(space.phenotypic_scale(), 0.0);
  const auto q = space.query(ledger[0].genotype);
  EXPECT_EQ(space.distance(q, ledger[0]), 0.0);
  EXPECT_GT(space.distance(q, ledger[7]), 0.0);
  EXPECT_THROW(DistanceMetric::blended(1.5), ConfigError);
}

TEST(Snapshot, KeepsBestAndRecent) {
  const auto p = BitStringProblem::onemax(6);
  std::vector<double> scores;
  for (int i = 0; i < 20; ++i) scores.push_back(i == 3 ? 100.0 : static_cast<double>(i % 5));
  const auto ledger = testutil::ledger_with_scores(p, scores);
  const auto snap = snapshot(ledger, 6, [&](const Bits& g) { return p.key(g); });
  ASSERT_EQ(snap.size(), 6u);
  EXPECT_EQ(snap[0].score, 100.0);
  EXPECT_EQ(snap[5].genotype, ledger[19].genotype);
  for (std::size_t i = 0; i < snap.size(); ++i) EXPECT_EQ(snap[i].eval_order, i);
  const auto whole = snapshot(ledger, 64, [&](const Bits& g) { return p.key(g); });
  EXPECT_EQ(whole.size(), ledger.size());
}
