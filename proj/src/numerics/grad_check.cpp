#include "mtalk/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace mtalk::numerics {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_diff_check(const LossBuilder& loss, std::span<Parameter* const> params,
                                  double step, const GradientTamper& tamper) {
  for (Parameter* p : params) {
    p->grad = Matrix(p->value.rows(), p->value.cols());
  }
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  if (tamper) tamper(params);

  auto evaluate = [&loss] {
    Tape tape;
    return loss(tape).value()(0, 0);
  };

  GradCheckResult result;
  for (Parameter* p : params) {
    if (p->frozen) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = evaluate();
      x = saved - step;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad.data()[i];
      const double err = relative_error(analytic, numeric);
      ++result.coordinates;
      if (err > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        if (err >= result.max_relative_error) {
          result.worst_parameter = p->name;
          result.worst_index = i;
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace mtalk::numerics
