#include "mtalk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <tuple>

#include "mtalk/errors.hpp"

namespace mtalk::metrics {

CountMetrics count_metrics(const CountEval& ev) {
  const std::size_t n = ev.predictions.size();
  if (n != ev.ground_truths.size()) {
    throw DimensionError("count_metrics: " + std::to_string(n) + " predictions for " +
                         std::to_string(ev.ground_truths.size()) + " ground truths");
  }
  if (n == 0) throw DomainError("count_metrics: empty evaluation");
  CountMetrics m;
  double squared = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = static_cast<double>(ev.predictions[i]);
    const double g = static_cast<double>(ev.ground_truths[i]);
    if (ev.ground_truths[i] == 0) throw DomainError("count_metrics: ground truth 0 at index " + std::to_string(i));
    const double diff = std::abs(p - g);
    if (diff <= 1.0) m.obo += 1.0;
    if (diff == 0.0) m.obz += 1.0;
    m.mae += diff / g;
    squared += diff * diff;
  }
  const double count = static_cast<double>(n);
  m.obo /= count;
  m.obz /= count;
  m.mae /= count;
  m.rmse = std::sqrt(squared / count);
  return m;
}

SelectionScore selection_pr(std::span<const std::size_t> selected, std::span<const std::size_t> truth,
                            std::size_t tolerance) {
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      const std::size_t d = selected[i] > truth[j] ? selected[i] - truth[j] : truth[j] - selected[i];
      if (d <= tolerance) pairs.emplace_back(d, i, j);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<bool> used_sel(selected.size()), used_truth(truth.size());
  SelectionScore score;
  for (const auto& [d, i, j] : pairs) {
    if (used_sel[i] || used_truth[j]) continue;
    used_sel[i] = used_truth[j] = true;
    ++score.matched;
  }
  if (!selected.empty()) score.precision = static_cast<double>(score.matched) / static_cast<double>(selected.size());
  if (!truth.empty()) score.recall = static_cast<double>(score.matched) / static_cast<double>(truth.size());
  return score;
}

double exact_match(std::span<const generator::TokenSequence> outputs,
                   std::span<const generator::TokenSequence> targets) {
  if (outputs.size() != targets.size()) {
    throw DimensionError("exact_match: " + std::to_string(outputs.size()) + " outputs for " +
                         std::to_string(targets.size()) + " targets");
  }
  if (outputs.empty()) throw DomainError("exact_match: no sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outputs.size(); ++i) hits += outputs[i] == targets[i];
  return static_cast<double>(hits) / static_cast<double>(outputs.size());
}

std::uint64_t flop_count(std::size_t text_len, std::size_t motion_len, std::size_t hidden) {
  return attention_macs(text_len + motion_len, hidden);
}

std::uint64_t measured_attention_macs(const numerics::Tape& tape) {
  return tape.macs().section(generator::kDecoderAttentionSection);
}

std::uint64_t measure_attention_macs(generator::Decoder& decoder, std::size_t length, std::uint64_t seed) {
  if (length == 0) throw DomainError("measure_attention_macs: empty sequence");
  std::mt19937_64 rng(seed);
  Tape tape;
  tape.macs().enable();
  Var sequence = tape.constant(Matrix::uniform(length, decoder.config().hidden, 1.0, rng));
  decoder.hidden_states(tape, sequence, length);
  return measured_attention_macs(tape);
}

double FlopReport::analytic_ratio() const {
  return static_cast<double>(analytic_selected) / static_cast<double>(analytic_full);
}

double FlopReport::measured_ratio() const {
  return static_cast<double>(measured_selected) / static_cast<double>(measured_full);
}

FlopReport measure_flops(generator::Decoder& decoder, std::size_t text_len, std::size_t frames,
                         std::size_t viewpoints, std::uint64_t seed) {
  if (viewpoints > frames) throw DomainError("measure_flops: K exceeds T");
  FlopReport r;
  r.text_len = text_len;
  r.frames = frames;
  r.viewpoints = viewpoints;
  r.hidden = decoder.config().hidden;
  r.analytic_full = flop_count(text_len, frames, r.hidden);
  r.analytic_selected = flop_count(text_len, viewpoints, r.hidden);
  r.measured_full = measure_attention_macs(decoder, text_len + frames, seed);
  r.measured_selected = measure_attention_macs(decoder, text_len + viewpoints, seed);
  return r;
}

}  // namespace mtalk::metrics
