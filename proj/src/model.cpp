#include "mtalk/model.hpp"

#include "mtalk/errors.hpp"

namespace mtalk {

namespace {

talker::TalkerConfig talker_config(const ModelConfig& cfg) {
  return {cfg.viewpoints, cfg.segment_size, cfg.hidden, cfg.score_scaling};
}

// Each sub-module gets its own stream so adding one does not reshuffle the others.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{seed, salt};
  return std::mt19937_64(seq);
}

}  // namespace

EncodedSample encode_sample(const data::MotionSample& sample, const data::Tokenizer& tokenizer) {
  EncodedSample e;
  e.id = sample.id;
  e.motion = sample.motion.values;
  if (sample.video) e.video = sample.video->values;
  e.query = tokenizer.tokenize(sample.query);
  const auto answer = tokenizer.tokenize(sample.answer);
  e.input.push_back(generator::kBos);
  e.input.insert(e.input.end(), answer.begin(), answer.end());
  e.targets = answer;
  e.targets.push_back(generator::kEos);
  e.labels = sample.labels;
  return e;
}

MotionTalkModel::MotionTalkModel(const ModelConfig& cfg) : cfg_(cfg) {
  auto rng_enc = stream(cfg.seed, 1);
  motion_encoder = encoders::AffineEncoder("encoder.motion", cfg.motion_dim, cfg.hidden, true, rng_enc);
  video_encoder = encoders::AffineEncoder("encoder.video", cfg.video_dim, cfg.hidden, true, rng_enc);
  estimator = encoders::MotionEstimator(cfg.video_dim, cfg.motion_dim);
  auto rng_enh = stream(cfg.seed, 2);
  enhancer = enhancer::FeatureEnhancer(cfg.hidden, rng_enh);
  auto rng_talk = stream(cfg.seed, 3);
  talker = talker::CrossTalker(talker_config(cfg), rng_talk);
  auto rng_dec = stream(cfg.seed, 4);
  decoder = generator::Decoder({cfg.vocab, cfg.hidden, cfg.max_tokens, 1024}, rng_dec);
  configure_stage(1);
}

MotionTalkModel::Prefix MotionTalkModel::prefix(Tape& tape, const std::optional<Matrix>& motion,
                                                const std::optional<Matrix>& video,
                                                std::span<const std::size_t> query) {
  if (!motion && !video) throw DomainError("sample has neither motion nor video");
  if (query.empty()) throw DomainError("empty query");
  Var motion_features;
  if (motion) {
    motion_features = motion_encoder.encode(tape, *motion);
  } else {
    const auto estimated = estimator.estimate(encoders::VideoFeatureSequence{*video});
    motion_features = motion_encoder.encode(tape, estimated.values);
  }
  Var enhanced = video ? enhancer.enhance(tape, video_encoder.encode(tape, *video), motion_features)
                       : enhancer.enhance_motion_only(tape, motion_features);
  Var text = decoder.embed_text(tape, query);
  auto out = talker.cross_talk(tape, text, enhanced);
  return {out.fused, std::move(out.selection), std::move(out.diagnostics)};
}

MotionTalkModel::Prefix MotionTalkModel::prefix(Tape& tape, const EncodedSample& sample) {
  return prefix(tape, sample.motion.empty() ? std::nullopt : std::optional<Matrix>(sample.motion),
                sample.video, sample.query);
}

Var MotionTalkModel::logits(Tape& tape, const EncodedSample& sample) {
  return decoder.decode_forward(tape, prefix(tape, sample).fused, sample.input);
}

Var MotionTalkModel::loss(Tape& tape, const EncodedSample& sample) {
  return generator::nll_loss(logits(tape, sample), sample.targets);
}

double MotionTalkModel::evaluate_loss(const EncodedSample& sample) {
  Tape tape;
  return loss(tape, sample).value()(0, 0);
}

generator::TokenSequence MotionTalkModel::generate(const EncodedSample& sample, std::size_t max_len) {
  Tape tape;
  const Matrix fused = prefix(tape, sample).fused.value();
  return decoder.generate_greedy(fused, max_len);
}

void MotionTalkModel::configure_stage(int stage) {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  ParameterList all = parameters();
  set_frozen(all, true);
  ParameterList trainable;
  enhancer.collect(trainable);
  talker.collect(trainable);
  if (stage == 2) {
    if (has_adapters()) {
      decoder.collect_adapters(trainable);
    } else {
      ParameterList base;
      decoder.collect_base(base);
      for (Parameter* p : base)
        if (p != &decoder.embedding && p != &decoder.positions) trainable.push_back(p);
    }
  }
  set_frozen(trainable, false);
}

ParameterList MotionTalkModel::parameters() {
  ParameterList out;
  motion_encoder.collect(out);
  video_encoder.collect(out);
  enhancer.collect(out);
  talker.collect(out);
  decoder.collect(out);
  return out;
}

ParameterList MotionTalkModel::trainable_parameters() {
  ParameterList out;
  for (Parameter* p : parameters())
    if (!p->frozen) out.push_back(p);
  return out;
}

Parameter* MotionTalkModel::find(const std::string& name) {
  for (Parameter* p : parameters())
    if (p->name == name) return p;
  return nullptr;
}

}  // namespace mtalk
