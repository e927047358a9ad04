#pragma once

#include <span>
#include <utility>
#include <vector>

#include "mtalk/layers.hpp"

namespace mtalk::encoders {

inline constexpr double kDefaultFps = 20.0;

// T x D_m joint features, one row per frame.
struct MotionSequence {
  Matrix values;
  double fps = kDefaultFps;

  std::size_t frames() const { return values.rows(); }
  std::size_t dims() const { return values.cols(); }
};

// T x D_v precomputed per-frame visual features.
struct VideoFeatureSequence {
  Matrix values;

  std::size_t frames() const { return values.rows(); }
  std::size_t dims() const { return values.cols(); }
};

struct EncoderConfig {
  std::size_t motion_dim = 8;
  std::size_t video_dim = 8;
  std::size_t hidden = 32;
  bool frozen = true;
};

// Per-frame affine map D -> H standing in for a pretrained encoder.
class AffineEncoder {
 public:
  AffineEncoder() = default;
  AffineEncoder(const std::string& name, std::size_t in, std::size_t hidden, bool frozen,
                std::mt19937_64& rng);

  Var encode(Tape& tape, const Matrix& frames);
  Matrix encode(const Matrix& frames);

  std::size_t in_dim() const { return map.in_features(); }
  std::size_t hidden() const { return map.out_features(); }
  void collect(ParameterList& out) { map.collect(out); }

  Linear map;
};

class MotionEstimator {
 public:
  MotionEstimator() = default;
  MotionEstimator(std::size_t video_dim, std::size_t motion_dim);

  static MotionEstimator identity(std::size_t dim);

  // Throws StateError until the estimator is trained or explicitly initialized.
  MotionSequence estimate(const VideoFeatureSequence& video) const;

  bool ready() const { return ready_; }
  void mark_ready() { ready_ = true; }
  std::size_t video_dim() const { return weight.rows(); }
  std::size_t motion_dim() const { return weight.cols(); }

  Matrix weight;  // D_v x D_m
  Matrix bias;    // 1 x D_m
  double fps = kDefaultFps;

 private:
  bool ready_ = false;
};

struct EstimatorFit {
  MotionEstimator estimator;
  double mse = 0.0;
  std::size_t iterations = 0;
};

struct EstimatorTrainOptions {
  std::size_t max_iterations = 20000;
  double tolerance = 1e-14;
};

// Full-batch accelerated gradient descent on the per-element mean squared error.
EstimatorFit train_estimator(std::span<const std::pair<VideoFeatureSequence, MotionSequence>> pairs,
                             const EstimatorTrainOptions& options = {});

double mean_squared_error(const Matrix& a, const Matrix& b);

}  // namespace mtalk::encoders
