#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtalk/flops.hpp"
#include "mtalk/generator.hpp"

namespace mtalk::metrics {

struct CountEval {
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> ground_truths;
};

struct CountMetrics {
  double obo = 0.0;   // mean[|p - g| <= 1]
  double obz = 0.0;   // mean[p == g]
  double mae = 0.0;   // mean(|p - g| / g)
  double rmse = 0.0;  // sqrt(mean((p - g)^2))
};

// Empty input is a DomainError, unequal lengths a DimensionError, g = 0 a DomainError.
CountMetrics count_metrics(const CountEval& ev);

struct SelectionScore {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t matched = 0;
};

inline constexpr std::size_t kDefaultTolerance = 2;

// Pairs (selected, truth) within `tolerance` frames are matched closest-first (ties by
// selected index, then truth index); each index is used at most once. An empty
// selection or truth set gives 0 for the corresponding ratio.
SelectionScore selection_pr(std::span<const std::size_t> selected, std::span<const std::size_t> truth,
                            std::size_t tolerance = kDefaultTolerance);

// Fraction of positions where the two sequences are identical.
double exact_match(std::span<const generator::TokenSequence> outputs,
                   std::span<const generator::TokenSequence> targets);

// Analytic attention MACs for a decoder input of text_len + motion_len rows.
std::uint64_t flop_count(std::size_t text_len, std::size_t motion_len, std::size_t hidden);

// MACs recorded under the decoder attention section. StateError if the tape's counter
// was never enabled.
std::uint64_t measured_attention_macs(const numerics::Tape& tape);

// Runs the decoder block once over a random prefix of `length` rows with counting on.
std::uint64_t measure_attention_macs(generator::Decoder& decoder, std::size_t length, std::uint64_t seed);

struct FlopReport {
  std::size_t text_len = 0;
  std::size_t frames = 0;
  std::size_t viewpoints = 0;
  std::size_t hidden = 0;
  std::uint64_t analytic_full = 0;      // L = L_T + T
  std::uint64_t analytic_selected = 0;  // L = L_T + K
  std::uint64_t measured_full = 0;
  std::uint64_t measured_selected = 0;

  double analytic_ratio() const;
  double measured_ratio() const;
};

FlopReport measure_flops(generator::Decoder& decoder, std::size_t text_len, std::size_t frames,
                         std::size_t viewpoints, std::uint64_t seed = 1);

}  // namespace mtalk::metrics
