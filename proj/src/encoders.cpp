#include "mtalk/encoders.hpp"

#include <cmath>

#include "mtalk/errors.hpp"

namespace mtalk::encoders {

AffineEncoder::AffineEncoder(const std::string& name, std::size_t in, std::size_t hidden,
                             bool frozen, std::mt19937_64& rng)
    : map(name, in, hidden, true, rng) {
  map.set_frozen(frozen);
}

Var AffineEncoder::encode(Tape& tape, const Matrix& frames) {
  if (frames.cols() != in_dim()) {
    throw DimensionError(map.weight.name + ": frame width " + std::to_string(frames.cols()) +
                         ", expected " + std::to_string(in_dim()));
  }
  return map.forward(tape, tape.constant(frames));
}

Matrix AffineEncoder::encode(const Matrix& frames) {
  Tape tape;
  return encode(tape, frames).value();
}

MotionEstimator::MotionEstimator(std::size_t video_dim, std::size_t motion_dim)
    : weight(video_dim, motion_dim), bias(1, motion_dim) {}

MotionEstimator MotionEstimator::identity(std::size_t dim) {
  MotionEstimator est(dim, dim);
  est.weight = Matrix::identity(dim);
  est.mark_ready();
  return est;
}

MotionSequence MotionEstimator::estimate(const VideoFeatureSequence& video) const {
  if (!ready_) throw StateError("motion estimator is neither trained nor initialized");
  if (video.dims() != video_dim()) {
    throw DimensionError("estimator expects " + std::to_string(video_dim()) +
                         " video features, got " + std::to_string(video.dims()));
  }
  Matrix out = numerics::matmul(video.values, weight);
  for (std::size_t t = 0; t < out.rows(); ++t)
    for (std::size_t j = 0; j < out.cols(); ++j) out(t, j) += bias(0, j);
  return {std::move(out), fps};
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("mse: shape mismatch");
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

namespace {

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double largest_eigenvalue(const Matrix& gram) {
  Matrix v(gram.rows(), 1, 1.0);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Matrix w = numerics::matmul(gram, v);
    double norm = 0.0;
    for (double x : w.data()) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;
    v = numerics::scale(w, 1.0 / norm);
  }
  return lambda;
}

}  // namespace

EstimatorFit train_estimator(std::span<const std::pair<VideoFeatureSequence, MotionSequence>> pairs,
                             const EstimatorTrainOptions& options) {
  if (pairs.empty()) throw DomainError("train_estimator: no training pairs");
  const std::size_t dv = pairs.front().first.dims();
  const std::size_t dm = pairs.front().second.dims();
  std::size_t rows = 0;
  for (const auto& [video, motion] : pairs) {
    if (video.dims() != dv || motion.dims() != dm) {
      throw DimensionError("train_estimator: inconsistent feature dimensions across pairs");
    }
    if (video.frames() != motion.frames()) {
      throw DimensionError("train_estimator: video and motion frame counts differ");
    }
    rows += video.frames();
  }

  // Design matrix with a trailing constant column for the bias.
  Matrix x(rows, dv + 1);
  Matrix y(rows, dm);
  std::size_t r = 0;
  for (const auto& [video, motion] : pairs) {
    for (std::size_t t = 0; t < video.frames(); ++t, ++r) {
      for (std::size_t j = 0; j < dv; ++j) x(r, j) = video.values(t, j);
      x(r, dv) = 1.0;
      for (std::size_t j = 0; j < dm; ++j) y(r, j) = motion.values(t, j);
    }
  }

  const double norm = 2.0 / static_cast<double>(rows * dm);
  const double lipschitz = norm * largest_eigenvalue(numerics::matmul_tn(x, x));
  const double step = lipschitz > 0 ? 1.0 / lipschitz : 1.0;

  Matrix theta(dv + 1, dm);
  Matrix previous = theta;
  EstimatorFit fit;
  double momentum_t = 1.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    // Nesterov look-ahead point.
    const double next_t = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum_t * momentum_t));
    Matrix look = theta;
    const double beta = (momentum_t - 1.0) / next_t;
    for (std::size_t i = 0; i < look.size(); ++i)
      look.data()[i] += beta * (theta.data()[i] - previous.data()[i]);
    const Matrix residual = numerics::subtract(numerics::matmul(x, look), y);
    const Matrix grad = numerics::scale(numerics::matmul_tn(x, residual), norm);
    previous = theta;
    theta = numerics::subtract(look, numerics::scale(grad, step));
    momentum_t = next_t;
    fit.iterations = it + 1;
    if (mean_squared_error(numerics::matmul(x, theta), y) < options.tolerance) break;
  }

  fit.estimator = MotionEstimator(dv, dm);
  for (std::size_t i = 0; i < dv; ++i)
    for (std::size_t j = 0; j < dm; ++j) fit.estimator.weight(i, j) = theta(i, j);
  for (std::size_t j = 0; j < dm; ++j) fit.estimator.bias(0, j) = theta(dv, j);
  fit.estimator.mark_ready();
  fit.mse = mean_squared_error(numerics::matmul(x, theta), y);
  return fit;
}

}  // namespace mtalk::encoders
