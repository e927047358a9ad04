#pragma once

#include "mtalk/layers.hpp"

namespace mtalk::enhancer {

// Enriches motion features with video semantics:
//   F_V' = F_V + SA_v(F_V),  F_M' = F_M + SA_m(F_M)
//   C    = F_M' + CA(query = F_M', key/value = F_V')
//   out  = C + FFN(C)
class FeatureEnhancer {
 public:
  FeatureEnhancer() = default;
  FeatureEnhancer(std::size_t hidden, std::mt19937_64& rng);

  Var enhance(Tape& tape, Var video, Var motion);
  // Same pipeline with the cross-attention term dropped (C = F_M').
  Var enhance_motion_only(Tape& tape, Var motion);

  Matrix enhance(const Matrix& video, const Matrix& motion);
  Matrix enhance_motion_only(const Matrix& motion);

  // Zeroes every out-projection and the FFN's second layer.
  void zero_output_layers();
  void collect(ParameterList& out);

  std::size_t hidden() const { return hidden_; }

  AttentionBlock video_self;
  AttentionBlock motion_self;
  AttentionBlock cross;
  FeedForward ffn;

 private:
  std::size_t hidden_ = 0;
};

}  // namespace mtalk::enhancer
