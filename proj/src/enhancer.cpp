#include "mtalk/enhancer.hpp"

#include "mtalk/errors.hpp"

namespace mtalk::enhancer {

using numerics::add;

FeatureEnhancer::FeatureEnhancer(std::size_t hidden, std::mt19937_64& rng)
    : video_self("enhancer.video_self", hidden, rng),
      motion_self("enhancer.motion_self", hidden, rng),
      cross("enhancer.cross", hidden, rng),
      ffn("enhancer.ffn", hidden, rng),
      hidden_(hidden) {}

namespace {

void check_width(Var x, std::size_t hidden, const char* what) {
  if (x.cols() != hidden) {
    throw DimensionError(std::string("enhancer: ") + what + " width " + std::to_string(x.cols()) +
                         ", expected " + std::to_string(hidden));
  }
}

}  // namespace

Var FeatureEnhancer::enhance(Tape& tape, Var video, Var motion) {
  check_width(video, hidden_, "video");
  check_width(motion, hidden_, "motion");
  if (video.rows() != motion.rows()) {
    throw DimensionError("enhancer: " + std::to_string(video.rows()) + " video frames vs " +
                         std::to_string(motion.rows()) + " motion frames");
  }
  Var video_ctx = add(video, video_self.forward(tape, video, video));
  Var motion_ctx = add(motion, motion_self.forward(tape, motion, motion));
  Var fused = add(motion_ctx, cross.forward(tape, motion_ctx, video_ctx));
  return add(fused, ffn.forward(tape, fused));
}

Var FeatureEnhancer::enhance_motion_only(Tape& tape, Var motion) {
  check_width(motion, hidden_, "motion");
  Var motion_ctx = add(motion, motion_self.forward(tape, motion, motion));
  return add(motion_ctx, ffn.forward(tape, motion_ctx));
}

Matrix FeatureEnhancer::enhance(const Matrix& video, const Matrix& motion) {
  Tape tape;
  return enhance(tape, tape.constant(video), tape.constant(motion)).value();
}

Matrix FeatureEnhancer::enhance_motion_only(const Matrix& motion) {
  Tape tape;
  return enhance_motion_only(tape, tape.constant(motion)).value();
}

void FeatureEnhancer::zero_output_layers() {
  video_self.out.zero();
  motion_self.out.zero();
  cross.out.zero();
  ffn.down.zero();
}

void FeatureEnhancer::collect(ParameterList& out) {
  video_self.collect(out);
  motion_self.collect(out);
  cross.collect(out);
  ffn.collect(out);
}

}  // namespace mtalk::enhancer
