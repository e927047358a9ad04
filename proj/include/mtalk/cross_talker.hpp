#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mtalk/layers.hpp"

namespace mtalk::talker {

struct TalkerConfig {
  std::size_t viewpoints = 4;     // K
  std::size_t segment_size = 8;   // S_n, frames per pooled segment
  std::size_t hidden = 32;        // H (= d for every attention block)
  // Multiply each selected viewpoint by s_k / sum(s) so the relevance projections
  // receive gradient through the hard top-K.
  bool score_scaling = true;
};

// Text-to-motion relevance: A is L_T x T row-stochastic, scores[j] = max_i A(i, j).
struct RelevanceResult {
  Matrix attention;
  std::vector<double> scores;
};

struct ViewpointSelection {
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> scores;        // scores of the selected frames, same order
  bool clamped = false;              // requested K exceeded T

  std::size_t size() const { return indices.size(); }
};

struct FusedSequence {
  Matrix values;  // (L_T + K) x H, text rows first
  std::size_t text_len = 0;
  std::size_t motion_len = 0;
};

struct TalkerDiagnostics {
  Matrix attention;
  std::vector<double> scores;
  std::vector<double> receptive_fields;          // r_k per viewpoint
  std::vector<std::vector<std::size_t>> windows;  // W_k per viewpoint
  std::uint64_t fused_attention_macs = 0;          // analytic, L = L_T + K
  std::uint64_t baseline_attention_macs = 0;       // analytic, L = L_T + T
  std::vector<std::string> warnings;
};

// Top-K by score (ties keep the lower index), returned in temporal order.
// K larger than the number of scores is clamped. K = 0 is a DomainError.
ViewpointSelection select_viewpoints(std::span<const double> scores, std::size_t k);

// {j in [0, T) : |j - k| <= floor(r * T)}
std::vector<std::size_t> local_window(std::size_t k, double r, std::size_t frames);

// ceil(T / S_n) rows; row n is the mean of frames [n S_n, min((n+1) S_n, T)).
Matrix pool_segments(const Matrix& motion, std::size_t segment_size);
Var pool_segments(Var motion, std::size_t segment_size);

class CrossTalker {
 public:
  struct TrackedRelevance {
    Var attention;
    Var scores;  // 1 x T
  };

  struct Output {
    Var fused;
    ViewpointSelection selection;
    TalkerDiagnostics diagnostics;
  };

  CrossTalker() = default;
  CrossTalker(const TalkerConfig& cfg, std::mt19937_64& rng);

  TrackedRelevance compute_relevance(Tape& tape, Var text, Var motion);
  RelevanceResult compute_relevance(const Matrix& text, const Matrix& motion);

  // r_k = sigmoid(head(attn(vp Wq, U Wk, U Wv))) with U the unselected frames.
  // An empty unselected set yields r_k = 0.
  Var regress_receptive_field(Tape& tape, Var viewpoint, Var unselected);
  double regress_receptive_field(const Matrix& viewpoint, const Matrix& unselected);

  // F_local(k) = F(k) + out(attn(F(k), F(W_k), F(W_k)))
  Var aggregate_local(Tape& tape, Var motion, std::size_t k, std::span<const std::size_t> window);
  Matrix aggregate_local(const Matrix& motion, std::size_t k, std::span<const std::size_t> window);

  // F_global(k) = F_local(k) + out(attn(F_local(k), seg, seg))
  Var aggregate_global(Tape& tape, Var local, Var segments);
  Matrix aggregate_global(const Matrix& local, const Matrix& segments);

  // [F_local; F_global] (1 x 2H) projected back to 1 x H.
  Var assemble_viewpoint(Tape& tape, Var local, Var global);
  Matrix assemble_viewpoint(const Matrix& local, const Matrix& global);

  // Symmetric bidirectional cross-attention (both directions read the pre-update
  // counterpart) followed by per-modality residual FFNs. Rows: [text; motion].
  Var fuse_bidirectional(Tape& tape, Var text, Var viewpoints);
  FusedSequence fuse_bidirectional(const Matrix& text, const Matrix& viewpoints);

  Output cross_talk(Tape& tape, Var text, Var motion);

  void zero_output_layers();
  void collect(ParameterList& out);
  const TalkerConfig& config() const { return cfg_; }
  TalkerConfig& config() { return cfg_; }

  Linear relevance_q, relevance_k;
  Linear receptive_q, receptive_k, receptive_v, receptive_head;
  AttentionBlock local_attention;
  AttentionBlock global_attention;
  Linear projection;  // 2H -> H
  AttentionBlock motion_from_text;
  AttentionBlock text_from_motion;
  FeedForward motion_ffn;
  FeedForward text_ffn;

 private:
  TalkerConfig cfg_;
};

}  // namespace mtalk::talker
