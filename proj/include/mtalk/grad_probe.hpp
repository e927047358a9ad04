#pragma once

#include <cstdint>
#include <string>

#include "mtalk/numerics/grad_check.hpp"

namespace mtalk::diagnostics {

struct CompositeShape {
  std::size_t frames = 0;      // T
  std::size_t hidden = 0;      // H
  std::size_t text_len = 0;    // L_T
  std::size_t viewpoints = 0;  // K
};

// T in {4, 8}, H in {4, 8}, L_T in {2, 4}, K in {2, 3}, drawn from the seed.
CompositeShape composite_shape(std::uint64_t seed);

struct CompositeCheck {
  CompositeShape shape;
  numerics::GradCheckResult result;
  std::string worst_module;     // enhancer, talker or decoder
  std::size_t redraws = 0;      // inputs rejected for sitting near a selection boundary
};

// Finite-difference check of enhance -> cross_talk -> decode_forward -> nll_loss over every
// enhancer, talker and decoder weight. Inputs whose top-K gap, column-max gap or window
// radius r_k * T lies within 1e-4 of a switch point are redrawn, since the loss is not
// differentiable there. `inject_fault` perturbs one analytic gradient to self-test.
CompositeCheck composite_grad_check(std::uint64_t seed, bool inject_fault = false, double step = 1e-5);

// Parameter-name prefix before the first '.'.
std::string module_of(const std::string& parameter_name);

}  // namespace mtalk::diagnostics
