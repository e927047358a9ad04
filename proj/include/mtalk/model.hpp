#pragma once

#include <optional>
#include <string>

#include "mtalk/cross_talker.hpp"
#include "mtalk/data.hpp"
#include "mtalk/encoders.hpp"
#include "mtalk/enhancer.hpp"
#include "mtalk/generator.hpp"

namespace mtalk {

struct ModelConfig {
  std::size_t motion_dim = 8;
  std::size_t video_dim = 8;
  std::size_t hidden = 32;
  std::size_t vocab = 16;
  std::size_t max_tokens = 24;
  std::size_t viewpoints = 4;
  std::size_t segment_size = 8;
  bool score_scaling = true;
  std::uint64_t seed = 1;
};

// A sample with its text already mapped to token ids.
struct EncodedSample {
  std::string id;
  Matrix motion;
  std::optional<Matrix> video;
  generator::TokenSequence query;
  generator::TokenSequence input;    // BOS + answer
  generator::TokenSequence targets;  // answer + EOS
  data::Labels labels;
};

EncodedSample encode_sample(const data::MotionSample& sample, const data::Tokenizer& tokenizer);

// Encoders -> enhancer -> cross talker -> decoder.
class MotionTalkModel {
 public:
  struct Prefix {
    Var fused;
    talker::ViewpointSelection selection;
    talker::TalkerDiagnostics diagnostics;
  };

  explicit MotionTalkModel(const ModelConfig& cfg);
  MotionTalkModel(const MotionTalkModel&) = delete;
  MotionTalkModel& operator=(const MotionTalkModel&) = delete;

  // Video-only inputs are routed through the motion estimator, which must be ready.
  Prefix prefix(Tape& tape, const std::optional<Matrix>& motion, const std::optional<Matrix>& video,
                std::span<const std::size_t> query);
  Prefix prefix(Tape& tape, const EncodedSample& sample);

  Var logits(Tape& tape, const EncodedSample& sample);
  Var loss(Tape& tape, const EncodedSample& sample);
  double evaluate_loss(const EncodedSample& sample);
  generator::TokenSequence generate(const EncodedSample& sample, std::size_t max_len);

  // Stage 1: enhancer + talker trainable. Stage 2: also decoder adapters (or, without
  // adapters, the decoder's non-embedding weights). Encoders always frozen.
  void configure_stage(int stage);

  ParameterList parameters();
  ParameterList trainable_parameters();
  Parameter* find(const std::string& name);

  const ModelConfig& config() const { return cfg_; }
  bool has_adapters() const { return decoder.output.adapter.has_value(); }

  encoders::AffineEncoder motion_encoder;
  encoders::AffineEncoder video_encoder;
  encoders::MotionEstimator estimator;
  enhancer::FeatureEnhancer enhancer;
  talker::CrossTalker talker;
  generator::Decoder decoder;

 private:
  ModelConfig cfg_;
};

}  // namespace mtalk
