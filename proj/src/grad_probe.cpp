#include "mtalk/grad_probe.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mtalk/cross_talker.hpp"
#include "mtalk/enhancer.hpp"
#include "mtalk/errors.hpp"
#include "mtalk/generator.hpp"

namespace mtalk::diagnostics {

namespace {

constexpr double kMargin = 1e-4;

bool near_switch(const talker::CrossTalker::Output& out, std::size_t frames) {
  std::vector<double> sorted = out.diagnostics.scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const std::size_t k = out.selection.size();
  if (k < sorted.size() && sorted[k - 1] - sorted[k] < kMargin) return true;

  const Matrix& a = out.diagnostics.attention;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    std::vector<double> column(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) column[i] = a(i, j);
    std::sort(column.begin(), column.end(), std::greater<>());
    if (column.size() > 1 && column[0] - column[1] < kMargin) return true;
  }
  for (double r : out.diagnostics.receptive_fields) {
    const double radius = r * static_cast<double>(frames);
    if (std::abs(radius - std::round(radius)) < kMargin) return true;
  }
  return false;
}

}  // namespace

CompositeShape composite_shape(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CompositeShape s;
  s.frames = rng() % 2 ? 8 : 4;
  s.hidden = rng() % 2 ? 8 : 4;
  s.text_len = rng() % 2 ? 4 : 2;
  s.viewpoints = rng() % 2 ? 3 : 2;
  return s;
}

std::string module_of(const std::string& parameter_name) {
  return parameter_name.substr(0, parameter_name.find('.'));
}

CompositeCheck composite_grad_check(std::uint64_t seed, bool inject_fault, double step) {
  CompositeCheck check;
  check.shape = composite_shape(seed);
  const CompositeShape& s = check.shape;
  constexpr std::size_t kVocab = 8;
  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);

  for (;; ++check.redraws) {
    if (check.redraws > 1000) throw StateError("composite_grad_check: no admissible draw");
    enhancer::FeatureEnhancer enhancer(s.hidden, rng);
    talker::CrossTalker talker({s.viewpoints, 2, s.hidden, true}, rng);
    generator::Decoder decoder({kVocab, s.hidden, 8, 64}, rng);
    const Matrix video = Matrix::uniform(s.frames, s.hidden, 1.0, rng);
    const Matrix motion = Matrix::uniform(s.frames, s.hidden, 1.0, rng);
    const Matrix text = Matrix::uniform(s.text_len, s.hidden, 1.0, rng);
    const generator::TokenSequence input = {generator::kBos, 4 + rng() % 4, 4 + rng() % 4};
    const generator::TokenSequence targets = {input[1], input[2], generator::kEos};

    ParameterList params;
    enhancer.collect(params);
    talker.collect(params);
    decoder.collect(params);
    set_frozen(params, false);

    auto loss = [&](Tape& tape) {
      Var fused_motion = enhancer.enhance(tape, tape.constant(video), tape.constant(motion));
      auto out = talker.cross_talk(tape, tape.constant(text), fused_motion);
      return generator::nll_loss(decoder.decode_forward(tape, out.fused, input), targets);
    };
    {
      Tape tape;
      Var fused_motion = enhancer.enhance(tape, tape.constant(video), tape.constant(motion));
      auto out = talker.cross_talk(tape, tape.constant(text), fused_motion);
      if (near_switch(out, s.frames)) continue;
    }

    numerics::GradientTamper tamper;
    if (inject_fault) {
      tamper = [](std::span<Parameter* const> ps) {
        for (Parameter* p : ps) {
          if (p->name == "talker.projection.w") p->grad.data()[0] += 1e-2 * (1.0 + std::abs(p->grad.data()[0]));
        }
      };
    }
    check.result = numerics::finite_diff_check(loss, params, step, tamper);
    check.worst_module = module_of(check.result.worst_parameter);
    return check;
  }
}

}  // namespace mtalk::diagnostics
