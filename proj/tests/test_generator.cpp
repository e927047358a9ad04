#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "mtalk/errors.hpp"
#include "mtalk/generator.hpp"
#include "mtalk/numerics/grad_check.hpp"
#include "mtalk/training.hpp"
#include "oracle.hpp"

namespace {

using mtalk::Matrix;
using mtalk::Tape;
using namespace mtalk::generator;
namespace nx = mtalk::numerics;

Decoder make_decoder(std::size_t vocab, std::size_t hidden, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Decoder({vocab, hidden, 8, 64}, rng);
}

TEST(Vocabulary, ReservedIdsAndBijection) {
  Vocabulary v;
  EXPECT_EQ(v.id("<pad>"), kPad);
  EXPECT_EQ(v.id("<bos>"), kBos);
  EXPECT_EQ(v.id("<eos>"), kEos);
  EXPECT_EQ(v.id("<unk>"), kUnk);
  const std::size_t lift = v.add("lift");
  EXPECT_EQ(v.add("lift"), lift);
  EXPECT_EQ(v.token(lift), "lift");
  EXPECT_EQ(v.id("missing"), kUnk);
  EXPECT_THROW(v.token(99), mtalk::DomainError);
}

TEST(Vocabulary, FileRoundTrip) {
  Vocabulary v;
  for (const char* t : {"lift", "the", "left", "arm"}) v.add(t);
  const auto path = std::filesystem::temp_directory_path() / "mtalk_vocab_test.txt";
  v.save(path);
  EXPECT_EQ(Vocabulary::load(path), v);
  std::filesystem::remove(path);
  EXPECT_THROW(Vocabulary::from_tokens({"lift"}), mtalk::ParseError);
}

TEST(DecodeForward, CausalPrefixStability) {
  auto d = make_decoder(10, 8, 1);
  std::mt19937_64 rng(2);
  const Matrix prefix = Matrix::uniform(3, 8, 1.0, rng);
  const Matrix a = d.decode_forward(prefix, TokenSequence{kBos, 4, 5, 6});
  for (std::size_t t = 1; t < 4; ++t) {
    TokenSequence changed = {kBos, 4, 5, 6};
    changed[t] = 9;
    const Matrix b = d.decode_forward(prefix, changed);
    EXPECT_EQ(nx::slice_rows(a, 0, t), nx::slice_rows(b, 0, t));
    EXPECT_NE(nx::slice_rows(a, t, t + 1), nx::slice_rows(b, t, t + 1));
  }
}

TEST(DecodeForward, LogitRowsGiveDistributions) {
  auto d = make_decoder(12, 8, 3);
  std::mt19937_64 rng(4);
  const Matrix p = nx::row_softmax(d.decode_forward(Matrix::uniform(2, 8, 1.0, rng), TokenSequence{kBos, 5, 7}));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double total = 0.0;
    for (double v : p.row(r)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(DecodeForward, SingleTokenWithZeroBlockOutputsIsEmbeddingTimesOutput) {
  auto d = make_decoder(6, 4, 5);
  d.zero_output_layers();
  std::mt19937_64 rng(6);
  const Matrix logits = d.decode_forward(Matrix::uniform(2, 4, 1.0, rng), TokenSequence{kBos});
  // The token row is its embedding plus the position-0 code; the FFN bias stays zero.
  oracle::Grid row = {std::vector<double>(4)};
  for (std::size_t c = 0; c < 4; ++c) row[0][c] = d.embedding.value(kBos, c) + d.positions.value(0, c);
  EXPECT_LT(oracle::max_diff(logits, oracle::matmul(row, oracle::from(d.output.weight.value))), 1e-12);
}

TEST(DecodeForward, Errors) {
  auto d = make_decoder(6, 4, 7);
  EXPECT_THROW(d.decode_forward(Matrix(1, 4), TokenSequence{kBos, 6}), mtalk::DomainError);
  EXPECT_THROW(d.decode_forward(Matrix(1, 4), TokenSequence{}), mtalk::DomainError);
  EXPECT_THROW(d.decode_forward(Matrix(1, 3), TokenSequence{kBos}), mtalk::DimensionError);
}

TEST(DecodeForward, PrefixSensitivity) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto d = make_decoder(10, 8, seed);
    std::mt19937_64 rng(seed + 100);
    const Matrix prefix = Matrix::uniform(3, 8, 1.0, rng);
    const Matrix base = d.decode_forward(prefix, TokenSequence{kBos});
    for (std::size_t r = 0; r < 3; ++r) {
      Matrix changed = prefix;
      changed(r, 0) += 0.25;
      EXPECT_NE(d.decode_forward(changed, TokenSequence{kBos}), base);
    }
  }
}

TEST(NllLoss, UniformLogitsGiveLogV) {
  const std::size_t targets[] = {3, 1};
  EXPECT_NEAR(nll_loss(Matrix(2, 7), targets), std::log(7.0), 1e-15);
}

TEST(NllLoss, ConfidentCorrectClassNearZero) {
  Matrix logits(1, 4);
  logits(0, 2) = 1e3;
  const std::size_t targets[] = {2};
  EXPECT_NEAR(nll_loss(logits, targets), 0.0, 1e-12);
}

TEST(NllLoss, TwoTokensMatchHandComputation) {
  const Matrix logits{{1.0, 2.0, 0.5}, {-1.0, 0.0, 3.0}};
  const std::size_t targets[] = {1, 2};
  const double first = -(2.0 - std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5)));
  const double second = -(3.0 - std::log(std::exp(-1.0) + std::exp(0.0) + std::exp(3.0)));
  EXPECT_NEAR(nll_loss(logits, targets), 0.5 * (first + second), 1e-14);
}

TEST(NllLoss, PadMaskedAndAllPadRejected) {
  const Matrix logits{{1.0, 2.0, 0.5}, {-1.0, 0.0, 3.0}};
  const std::size_t one[] = {1};
  const std::size_t padded[] = {1, kPad};
  EXPECT_EQ(nll_loss(logits, padded), nll_loss(nx::slice_rows(logits, 0, 1), one));
  const std::size_t all_pad[] = {kPad, kPad};
  EXPECT_THROW(nll_loss(logits, all_pad), mtalk::DomainError);
}

TEST(NllLoss, GradientThroughDecodeForward) {
  // Step 1e-4 for the reason given in test_enhancer.cpp.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::size_t hidden = seed % 2 ? 4 : 8;
    auto d = make_decoder(8, hidden, seed);
    std::mt19937_64 rng(seed + 50);
    const Matrix prefix = Matrix::uniform(2 + seed % 4, hidden, 1.0, rng);
    const TokenSequence input = {kBos, 4 + seed % 4, 5};
    const TokenSequence targets = {input[1], input[2], kEos};
    mtalk::ParameterList params;
    d.collect(params);
    const auto r = nx::finite_diff_check(
        [&](Tape& t) { return nll_loss(d.decode_forward(t, t.constant(prefix), input), targets); }, params,
        1e-4);
    EXPECT_LE(r.max_relative_error, 1e-4) << "seed " << seed << " at " << r.worst_parameter;
  }
}

TEST(GenerateGreedy, ZeroLengthAndDeterminism) {
  auto d = make_decoder(10, 8, 8);
  std::mt19937_64 rng(9);
  const Matrix prefix = Matrix::uniform(3, 8, 1.0, rng);
  EXPECT_TRUE(d.generate_greedy(prefix, 0).empty());
  const auto a = d.generate_greedy(prefix, 6);
  EXPECT_EQ(a, d.generate_greedy(prefix, 6));
  EXPECT_LE(a.size(), 6u);
}

TEST(GenerateGreedy, TiesPickLowestId) {
  auto d = make_decoder(6, 4, 10);
  d.output.zero();
  EXPECT_EQ(d.generate_greedy(Matrix(1, 4), 3), (TokenSequence{kPad, kPad, kPad}));
}

TEST(GenerateGreedy, ReproducesOverfittedPair) {
  auto d = make_decoder(10, 8, 11);
  std::mt19937_64 rng(12);
  const Matrix prefix = Matrix::uniform(3, 8, 1.0, rng);
  const TokenSequence input = {kBos, 5, 8, 6};
  const TokenSequence targets = {5, 8, 6, kEos};
  mtalk::ParameterList params;
  d.collect(params);
  mtalk::training::TrainConfig cfg;
  cfg.lr_max = 1e-2;
  mtalk::training::AdamState state;
  for (int step = 0; step < 300; ++step) {
    for (auto* p : params) p->zero_grad();
    Tape tape;
    tape.backward(nll_loss(d.decode_forward(tape, tape.constant(prefix), input), targets));
    mtalk::training::adam_step(params, state, cfg.lr_max, cfg);
  }
  EXPECT_EQ(d.generate_greedy(prefix, 8), targets);
}

}  // namespace
