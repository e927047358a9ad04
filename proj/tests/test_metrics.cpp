#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mtalk/errors.hpp"
#include "mtalk/metrics.hpp"

namespace {

using namespace mtalk::metrics;

TEST(CountMetrics, PerfectPredictions) {
  const auto m = count_metrics({{3, 5, 7}, {3, 5, 7}});
  EXPECT_EQ(m.obo, 1.0);
  EXPECT_EQ(m.obz, 1.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
}

TEST(CountMetrics, SingleOffByOne) {
  const auto m = count_metrics({{5}, {4}});
  EXPECT_EQ(m.obo, 1.0);
  EXPECT_EQ(m.obz, 0.0);
  EXPECT_EQ(m.mae, 0.25);
  EXPECT_EQ(m.rmse, 1.0);
}

TEST(CountMetrics, TwoPairs) {
  const auto m = count_metrics({{2, 8}, {4, 8}});
  EXPECT_EQ(m.obo, 0.5);
  EXPECT_EQ(m.obz, 0.5);
  EXPECT_EQ(m.mae, 0.25);
  EXPECT_EQ(m.rmse, std::sqrt(2.0));
}

TEST(CountMetrics, Errors) {
  EXPECT_THROW(count_metrics({{}, {}}), mtalk::DomainError);
  EXPECT_THROW(count_metrics({{1, 2}, {1}}), mtalk::DimensionError);
  EXPECT_THROW(count_metrics({{1}, {0}}), mtalk::DomainError);
}

TEST(CountMetrics, PropertiesOnRandomPairs) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> count(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    CountEval ev;
    const std::size_t n = 1 + trial % 7;
    for (std::size_t i = 0; i < n; ++i) {
      ev.predictions.push_back(count(rng));
      ev.ground_truths.push_back(1 + count(rng));
    }
    const auto m = count_metrics(ev);
    EXPECT_LE(m.obz, m.obo);
    double mean_error = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      mean_error += (static_cast<double>(ev.predictions[i]) - static_cast<double>(ev.ground_truths[i])) / n;
    EXPECT_GE(m.rmse + 1e-12, std::fabs(mean_error));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    CountEval shuffled;
    for (std::size_t i : perm) {
      shuffled.predictions.push_back(ev.predictions[i]);
      shuffled.ground_truths.push_back(ev.ground_truths[i]);
    }
    const auto s = count_metrics(shuffled);
    EXPECT_EQ(s.obo, m.obo);
    EXPECT_EQ(s.obz, m.obz);
    EXPECT_NEAR(s.mae, m.mae, 1e-15);
    EXPECT_NEAR(s.rmse, m.rmse, 1e-15);
  }
}

TEST(SelectionPr, Examples) {
  const std::size_t truth[] = {5, 25};
  const auto same = selection_pr(truth, truth, 0);
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  const auto none = selection_pr({}, truth, 2);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  const std::size_t one[] = {4};
  const auto partial = selection_pr(one, truth, 2);
  EXPECT_EQ(partial.precision, 1.0);
  EXPECT_EQ(partial.recall, 0.5);
}

TEST(SelectionPr, EachTruthUsedOnce) {
  const std::size_t selected[] = {4, 6};
  const std::size_t truth[] = {5};
  const auto r = selection_pr(selected, truth, 2);
  EXPECT_EQ(r.matched, 1u);
  EXPECT_EQ(r.precision, 0.5);
  EXPECT_EQ(r.recall, 1.0);
  const std::size_t far[] = {9};
  EXPECT_EQ(selection_pr(far, truth, 2).matched, 0u);
  EXPECT_EQ(selection_pr(far, truth, 4).matched, 1u);
}

TEST(SelectionPr, ClosestPairsMatchFirst) {
  // Pairing 3 with truth 5 would leave selected 5 without a partner; closest-first pairs
  // 5-5 and then 3-1.
  const std::size_t selected[] = {3, 5};
  const std::size_t truth[] = {1, 5};
  EXPECT_EQ(selection_pr(selected, truth, 2).matched, 2u);
}

TEST(ExactMatch, Examples) {
  using mtalk::generator::TokenSequence;
  const std::vector<TokenSequence> a = {{4, 5}, {6}};
  const std::vector<TokenSequence> b = {{7}, {8, 9}};
  const std::vector<TokenSequence> half = {{4, 5}, {9}};
  EXPECT_EQ(exact_match(a, a), 1.0);
  EXPECT_EQ(exact_match(a, b), 0.0);
  EXPECT_EQ(exact_match(a, half), 0.5);
  EXPECT_THROW(exact_match(a, std::vector<TokenSequence>{{4}}), mtalk::DimensionError);
}

TEST(FlopCount, QuadraticLaw) {
  for (std::size_t h : {8, 32}) {
    for (std::size_t l : {16, 40, 100}) {
      EXPECT_EQ(flop_count(l, l, h), 4 * flop_count(l / 2, l / 2, h));
      const std::uint64_t len = 2 * l;
      EXPECT_EQ(flop_count(l, l, h), 2 * len * len * h + len * len);
    }
  }
}

TEST(FlopCount, SixteenOfTwoFiftySixRatio) {
  const double ratio = static_cast<double>(flop_count(16, 16, 32)) / static_cast<double>(flop_count(16, 256, 32));
  EXPECT_NEAR(ratio, (32.0 / 272.0) * (32.0 / 272.0), 1e-15);
  EXPECT_NEAR(ratio, 0.01384, 5e-6);
}

TEST(MeasureFlops, MeasuredMatchesAnalyticAndRepeats) {
  std::mt19937_64 rng(1);
  mtalk::generator::Decoder decoder({12, 32, 8, 64}, rng);
  for (std::size_t l : {32, 64, 128}) {
    const auto measured = measure_attention_macs(decoder, l, 3);
    EXPECT_EQ(measured, attention_macs(l, 32)) << "L=" << l;
    EXPECT_EQ(measured, measure_attention_macs(decoder, l, 4));
  }
  const auto report = measure_flops(decoder, 16, 256, 16);
  EXPECT_EQ(report.measured_full, report.analytic_full);
  EXPECT_NEAR(report.measured_ratio(), 0.01384, 0.01384 * 0.05);
  EXPECT_THROW(measure_flops(decoder, 16, 8, 9), mtalk::DomainError);
}

TEST(MeasureFlops, DisabledCounterIsStateError) {
  mtalk::Tape tape;
  EXPECT_THROW(measured_attention_macs(tape), mtalk::StateError);
}

}  // namespace
