#pragma once

// Straight-line reference implementations used as test oracles. They work on plain
// nested vectors with explicit loops and never call the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mtalk/cross_talker.hpp"
#include "mtalk/layers.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid from(const mtalk::Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

inline double max_diff(const mtalk::Matrix& m, const Grid& g) {
  if (m.rows() != g.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t r = 0; r < g.size(); ++r) {
    if (m.cols() != g[r].size()) return INFINITY;
    for (std::size_t c = 0; c < g[r].size(); ++c) worst = std::max(worst, std::fabs(m(r, c) - g[r][c]));
  }
  return worst;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
  Grid out(n, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i][p] * b[p][j];
      out[i][j] = acc;
    }
  return out;
}

inline Grid add(const Grid& a, const Grid& b) {
  Grid out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += b[i][j];
  return out;
}

inline Grid add_bias(const Grid& a, const Grid& bias) {
  Grid out = a;
  for (auto& row : out)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[0][j];
  return out;
}

inline Grid rows(const Grid& a, const std::vector<std::size_t>& idx) {
  Grid out;
  for (std::size_t i : idx) out.push_back(a[i]);
  return out;
}

inline std::vector<double> softmax(std::vector<double> x) {
  double hi = x[0];
  for (double v : x) hi = std::max(hi, v);
  double total = 0.0;
  for (double& v : x) {
    v = std::exp(v - hi);
    total += v;
  }
  for (double& v : x) v /= total;
  return x;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// softmax(q k^T / sqrt(d)) over already projected rows.
inline Grid attention_weights(const Grid& q, const Grid& k) {
  const double d = static_cast<double>(q[0].size());
  Grid w;
  for (const auto& qi : q) {
    std::vector<double> logits;
    for (const auto& kj : k) {
      double dot = 0.0;
      for (std::size_t c = 0; c < qi.size(); ++c) dot += qi[c] * kj[c];
      logits.push_back(dot / std::sqrt(d));
    }
    w.push_back(softmax(logits));
  }
  return w;
}

// out(attn(queries Wq, context Wk, context Wv))
inline Grid attention(const mtalk::AttentionBlock& blk, const Grid& queries, const Grid& context) {
  const Grid q = matmul(queries, from(blk.q.weight.value));
  const Grid k = matmul(context, from(blk.k.weight.value));
  const Grid v = matmul(context, from(blk.v.weight.value));
  return matmul(matmul(attention_weights(q, k), v), from(blk.out.weight.value));
}

inline Grid linear(const mtalk::Linear& l, const Grid& x) {
  Grid y = matmul(x, from(l.weight.value));
  if (l.bias) y = add_bias(y, from(l.bias->value));
  return y;
}

inline Grid ffn(const mtalk::FeedForward& f, const Grid& x) {
  Grid h = linear(f.up, x);
  for (auto& row : h)
    for (double& v : row) v = gelu(v);
  return linear(f.down, h);
}

inline Grid mean_of(const Grid& a, std::size_t begin, std::size_t end) {
  std::vector<double> m(a[0].size(), 0.0);
  for (std::size_t r = begin; r < end; ++r)
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += a[r][c];
  for (double& v : m) v /= static_cast<double>(end - begin);
  return {m};
}

// Relevance attention A and per-column maxima s.
struct Relevance {
  Grid attention;
  std::vector<double> scores;
};

inline Relevance relevance(const mtalk::talker::CrossTalker& t, const Grid& text, const Grid& motion) {
  Relevance r;
  r.attention = attention_weights(matmul(text, from(t.relevance_q.weight.value)),
                                  matmul(motion, from(t.relevance_k.weight.value)));
  for (std::size_t j = 0; j < motion.size(); ++j) {
    double best = r.attention[0][j];
    for (const auto& row : r.attention) best = std::max(best, row[j]);
    r.scores.push_back(best);
  }
  return r;
}

// Frame j is selected when fewer than K frames outrank it (higher score, or equal score
// and lower index).
inline std::vector<std::size_t> top_k(const std::vector<double>& s, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < s.size(); ++j) {
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] > s[j] || (s[i] == s[j] && i < j)) ++ahead;
    if (ahead < k) out.push_back(j);
  }
  return out;
}

inline std::vector<std::size_t> window(std::size_t k, double r, std::size_t frames) {
  std::vector<std::size_t> out;
  const double radius = std::floor(r * static_cast<double>(frames));
  for (std::size_t j = 0; j < frames; ++j) {
    const double dist = j > k ? static_cast<double>(j - k) : static_cast<double>(k - j);
    if (dist <= radius) out.push_back(j);
  }
  return out;
}

inline Grid pool(const Grid& motion, std::size_t segment) {
  Grid out;
  for (std::size_t b = 0; b < motion.size(); b += segment)
    out.push_back(mean_of(motion, b, std::min(b + segment, motion.size()))[0]);
  return out;
}

inline double receptive(const mtalk::talker::CrossTalker& t, const Grid& vp, const Grid& unselected) {
  if (unselected.empty()) return 0.0;
  const Grid q = matmul(vp, from(t.receptive_q.weight.value));
  const Grid k = matmul(unselected, from(t.receptive_k.weight.value));
  const Grid v = matmul(unselected, from(t.receptive_v.weight.value));
  const Grid pooled = matmul(attention_weights(q, k), v);
  return sigmoid(linear(t.receptive_head, pooled)[0][0]);
}

inline Grid local(const mtalk::talker::CrossTalker& t, const Grid& motion, std::size_t k,
                  const std::vector<std::size_t>& win) {
  const Grid centre = {motion[k]};
  return add(centre, attention(t.local_attention, centre, rows(motion, win)));
}

inline Grid global(const mtalk::talker::CrossTalker& t, const Grid& loc, const Grid& segments) {
  return add(loc, attention(t.global_attention, loc, segments));
}

inline Grid assemble(const mtalk::talker::CrossTalker& t, const Grid& loc, const Grid& glob) {
  Grid joined = loc;
  joined[0].insert(joined[0].end(), glob[0].begin(), glob[0].end());
  return linear(t.projection, joined);
}

inline Grid fuse(const mtalk::talker::CrossTalker& t, const Grid& text, const Grid& vps) {
  const Grid m1 = add(vps, attention(t.motion_from_text, vps, text));
  const Grid t1 = add(text, attention(t.text_from_motion, text, vps));
  Grid out = add(t1, ffn(t.text_ffn, t1));
  for (const auto& row : add(m1, ffn(t.motion_ffn, m1))) out.push_back(row);
  return out;
}

struct TalkResult {
  Grid fused;
  std::vector<std::size_t> selected;
  std::vector<double> receptive_fields;
};

// The whole cross talker written out in one pass.
inline TalkResult cross_talk(const mtalk::talker::CrossTalker& t, const Grid& text, const Grid& motion) {
  const auto& cfg = t.config();
  const Relevance rel = relevance(t, text, motion);
  TalkResult out;
  out.selected = top_k(rel.scores, cfg.viewpoints);
  std::vector<std::size_t> rest;
  for (std::size_t j = 0; j < motion.size(); ++j)
    if (std::find(out.selected.begin(), out.selected.end(), j) == out.selected.end()) rest.push_back(j);
  const Grid unselected = rows(motion, rest);
  const Grid segments = pool(motion, cfg.segment_size);
  double total = 0.0;
  for (std::size_t k : out.selected) total += rel.scores[k];
  Grid vps;
  for (std::size_t k : out.selected) {
    const double r = receptive(t, {motion[k]}, unselected);
    out.receptive_fields.push_back(r);
    const Grid loc = local(t, motion, k, window(k, r, motion.size()));
    Grid vp = assemble(t, loc, global(t, loc, segments));
    if (cfg.score_scaling)
      for (double& v : vp[0]) v *= rel.scores[k] / total;
    vps.push_back(vp[0]);
  }
  out.fused = fuse(t, text, vps);
  return out;
}

}  // namespace oracle
