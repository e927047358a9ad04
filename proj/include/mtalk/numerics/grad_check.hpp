#pragma once

#include <functional>
#include <span>
#include <string>

#include "mtalk/numerics/tape.hpp"

namespace mtalk::numerics {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Builds the scalar loss on the given tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

// Hook applied to analytic gradients before comparison. Used only to self-test the
// checker with a deliberately wrong gradient.
using GradientTamper = std::function<void(std::span<Parameter* const>)>;

// Compares reverse-mode gradients of every unfrozen parameter with the central
// difference (f(x+h) - f(x-h)) / 2h. Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8). Parameter values are restored on return and the
// gradients are left holding the analytic result.
GradCheckResult finite_diff_check(const LossBuilder& loss, std::span<Parameter* const> params,
                                  double step = 1e-5, const GradientTamper& tamper = {});

double relative_error(double analytic, double numeric);

}  // namespace mtalk::numerics
