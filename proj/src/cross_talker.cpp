#include "mtalk/cross_talker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtalk/errors.hpp"
#include "mtalk/flops.hpp"

namespace mtalk::talker {

using numerics::add;

ViewpointSelection select_viewpoints(std::span<const double> scores, std::size_t k) {
  if (k == 0) throw DomainError("select_viewpoints: K must be at least 1");
  ViewpointSelection sel;
  if (k > scores.size()) {
    sel.clamped = true;
    k = scores.size();
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  sel.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(sel.indices.begin(), sel.indices.end());
  for (std::size_t i : sel.indices) sel.scores.push_back(scores[i]);
  return sel;
}

std::vector<std::size_t> local_window(std::size_t k, double r, std::size_t frames) {
  if (k >= frames) throw DomainError("local_window: frame index outside the sequence");
  const auto radius = static_cast<std::size_t>(std::floor(std::max(r, 0.0) * static_cast<double>(frames)));
  const std::size_t lo = k >= radius ? k - radius : 0;
  const std::size_t hi = std::min(frames - 1, k + radius);
  std::vector<std::size_t> window(hi - lo + 1);
  std::iota(window.begin(), window.end(), lo);
  return window;
}

Matrix pool_segments(const Matrix& motion, std::size_t segment_size) {
  if (segment_size == 0) throw DomainError("pool_segments: segment size must be at least 1");
  std::vector<Matrix> rows;
  for (std::size_t begin = 0; begin < motion.rows(); begin += segment_size) {
    rows.push_back(numerics::mean_rows(motion, begin, std::min(begin + segment_size, motion.rows())));
  }
  return numerics::concat_rows(rows);
}

Var pool_segments(Var motion, std::size_t segment_size) {
  if (segment_size == 0) throw DomainError("pool_segments: segment size must be at least 1");
  std::vector<Var> rows;
  for (std::size_t begin = 0; begin < motion.rows(); begin += segment_size) {
    rows.push_back(numerics::mean_rows(motion, begin, std::min(begin + segment_size, motion.rows())));
  }
  return numerics::concat_rows(rows);
}

CrossTalker::CrossTalker(const TalkerConfig& cfg, std::mt19937_64& rng)
    : relevance_q("talker.relevance.q", cfg.hidden, cfg.hidden, false, rng),
      relevance_k("talker.relevance.k", cfg.hidden, cfg.hidden, false, rng),
      receptive_q("talker.receptive.q", cfg.hidden, cfg.hidden, false, rng),
      receptive_k("talker.receptive.k", cfg.hidden, cfg.hidden, false, rng),
      receptive_v("talker.receptive.v", cfg.hidden, cfg.hidden, false, rng),
      receptive_head("talker.receptive.head", cfg.hidden, 1, true, rng),
      local_attention("talker.local", cfg.hidden, rng),
      global_attention("talker.global", cfg.hidden, rng),
      projection("talker.projection", 2 * cfg.hidden, cfg.hidden, true, rng),
      motion_from_text("talker.fuse.motion_from_text", cfg.hidden, rng),
      text_from_motion("talker.fuse.text_from_motion", cfg.hidden, rng),
      motion_ffn("talker.fuse.motion_ffn", cfg.hidden, rng),
      text_ffn("talker.fuse.text_ffn", cfg.hidden, rng),
      cfg_(cfg) {
  if (cfg.viewpoints == 0) throw DomainError("talker: K must be at least 1");
  if (cfg.segment_size == 0) throw DomainError("talker: S_n must be at least 1");
}

CrossTalker::TrackedRelevance CrossTalker::compute_relevance(Tape& tape, Var text, Var motion) {
  if (text.cols() != cfg_.hidden || motion.cols() != cfg_.hidden) {
    throw DimensionError("compute_relevance: feature width must be " + std::to_string(cfg_.hidden));
  }
  Var q = relevance_q.forward(tape, text);
  Var k = relevance_k.forward(tape, motion);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var attention = numerics::row_softmax(numerics::scale(numerics::matmul_nt(q, k), inv_sqrt_d));
  return {attention, numerics::column_max(attention)};
}

RelevanceResult CrossTalker::compute_relevance(const Matrix& text, const Matrix& motion) {
  Tape tape;
  const auto rel = compute_relevance(tape, tape.constant(text), tape.constant(motion));
  const Matrix& s = rel.scores.value();
  return {rel.attention.value(), std::vector<double>(s.data().begin(), s.data().end())};
}

Var CrossTalker::regress_receptive_field(Tape& tape, Var viewpoint, Var unselected) {
  if (!unselected.valid() || unselected.rows() == 0) return tape.constant(Matrix(1, 1, 0.0));
  const auto attn = numerics::scaled_dot_attention(receptive_q.forward(tape, viewpoint),
                                                   receptive_k.forward(tape, unselected),
                                                   receptive_v.forward(tape, unselected));
  return numerics::sigmoid(receptive_head.forward(tape, attn.output));
}

double CrossTalker::regress_receptive_field(const Matrix& viewpoint, const Matrix& unselected) {
  Tape tape;
  Var u = unselected.rows() ? tape.constant(unselected) : Var{};
  return regress_receptive_field(tape, tape.constant(viewpoint), u).value()(0, 0);
}

Var CrossTalker::aggregate_local(Tape& tape, Var motion, std::size_t k,
                                 std::span<const std::size_t> window) {
  if (std::find(window.begin(), window.end(), k) == window.end()) {
    throw DomainError("aggregate_local: window does not contain its centre frame");
  }
  const std::size_t centre[] = {k};
  Var query = numerics::gather_rows(motion, centre);
  Var context = numerics::gather_rows(motion, window);
  return add(query, local_attention.forward(tape, query, context));
}

Matrix CrossTalker::aggregate_local(const Matrix& motion, std::size_t k,
                                    std::span<const std::size_t> window) {
  Tape tape;
  return aggregate_local(tape, tape.constant(motion), k, window).value();
}

Var CrossTalker::aggregate_global(Tape& tape, Var local, Var segments) {
  return add(local, global_attention.forward(tape, local, segments));
}

Matrix CrossTalker::aggregate_global(const Matrix& local, const Matrix& segments) {
  Tape tape;
  return aggregate_global(tape, tape.constant(local), tape.constant(segments)).value();
}

Var CrossTalker::assemble_viewpoint(Tape& tape, Var local, Var global) {
  const Var parts[] = {local, global};
  return projection.forward(tape, numerics::concat_cols(parts));
}

Matrix CrossTalker::assemble_viewpoint(const Matrix& local, const Matrix& global) {
  Tape tape;
  return assemble_viewpoint(tape, tape.constant(local), tape.constant(global)).value();
}

Var CrossTalker::fuse_bidirectional(Tape& tape, Var text, Var viewpoints) {
  if (text.cols() != viewpoints.cols()) {
    throw DimensionError("fuse_bidirectional: text width " + std::to_string(text.cols()) +
                         " vs motion width " + std::to_string(viewpoints.cols()));
  }
  Var motion_mid = add(viewpoints, motion_from_text.forward(tape, viewpoints, text));
  Var text_mid = add(text, text_from_motion.forward(tape, text, viewpoints));
  Var motion_out = add(motion_mid, motion_ffn.forward(tape, motion_mid));
  Var text_out = add(text_mid, text_ffn.forward(tape, text_mid));
  const Var rows[] = {text_out, motion_out};
  return numerics::concat_rows(rows);
}

FusedSequence CrossTalker::fuse_bidirectional(const Matrix& text, const Matrix& viewpoints) {
  Tape tape;
  return {fuse_bidirectional(tape, tape.constant(text), tape.constant(viewpoints)).value(),
          text.rows(), viewpoints.rows()};
}

CrossTalker::Output CrossTalker::cross_talk(Tape& tape, Var text, Var motion) {
  const std::size_t frames = motion.rows();
  Output out;
  TalkerDiagnostics& diag = out.diagnostics;

  const auto relevance = compute_relevance(tape, text, motion);
  diag.attention = relevance.attention.value();
  diag.scores = relevance.scores.value().data();

  out.selection = select_viewpoints(diag.scores, cfg_.viewpoints);
  if (out.selection.clamped) {
    diag.warnings.push_back("K=" + std::to_string(cfg_.viewpoints) + " exceeds T=" +
                            std::to_string(frames) + "; every frame is a viewpoint");
  }
  const auto& selected = out.selection.indices;

  std::vector<std::size_t> unselected;
  for (std::size_t j = 0, s = 0; j < frames; ++j) {
    if (s < selected.size() && selected[s] == j) {
      ++s;
    } else {
      unselected.push_back(j);
    }
  }
  Var unselected_rows = unselected.empty() ? Var{} : numerics::gather_rows(motion, unselected);
  Var segments = pool_segments(motion, cfg_.segment_size);

  std::vector<Var> viewpoint_rows;
  for (std::size_t k : selected) {
    const std::size_t centre[] = {k};
    Var row = numerics::gather_rows(motion, centre);
    const double r = regress_receptive_field(tape, row, unselected_rows).value()(0, 0);
    auto window = local_window(k, r, frames);
    Var local = aggregate_local(tape, motion, k, window);
    Var global = aggregate_global(tape, local, segments);
    viewpoint_rows.push_back(assemble_viewpoint(tape, local, global));
    diag.receptive_fields.push_back(r);
    diag.windows.push_back(std::move(window));
  }
  Var viewpoints = numerics::concat_rows(viewpoint_rows);
  if (cfg_.score_scaling) {
    Var weights = numerics::normalize_sum(numerics::gather_cols(relevance.scores, selected));
    viewpoints = numerics::scale_rows(viewpoints, weights);
  }
  out.fused = fuse_bidirectional(tape, text, viewpoints);

  diag.fused_attention_macs = metrics::attention_macs(text.rows() + selected.size(), cfg_.hidden);
  diag.baseline_attention_macs = metrics::attention_macs(text.rows() + frames, cfg_.hidden);
  return out;
}

void CrossTalker::zero_output_layers() {
  local_attention.out.zero();
  global_attention.out.zero();
  motion_from_text.out.zero();
  text_from_motion.out.zero();
  motion_ffn.down.zero();
  text_ffn.down.zero();
}

void CrossTalker::collect(ParameterList& out) {
  relevance_q.collect(out);
  relevance_k.collect(out);
  receptive_q.collect(out);
  receptive_k.collect(out);
  receptive_v.collect(out);
  receptive_head.collect(out);
  local_attention.collect(out);
  global_attention.collect(out);
  projection.collect(out);
  motion_from_text.collect(out);
  text_from_motion.collect(out);
  motion_ffn.collect(out);
  text_ffn.collect(out);
}

}  // namespace mtalk::talker
