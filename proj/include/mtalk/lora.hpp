#pragma once

#include <random>
#include <string>

#include "mtalk/numerics/matrix.hpp"
#include "mtalk/numerics/tape.hpp"

namespace mtalk::training {

struct LoraConfig {
  bool enabled = false;
  std::size_t rank = 4;
  double alpha = 8.0;
};

// Low-rank delta (alpha / r) * B * A for a base weight W of shape in x out used as
// x * W. A is r x out, B is in x r and starts at zero so the adapter is inert at init.
struct AdapterPair {
  AdapterPair() = default;
  AdapterPair(const std::string& name, std::size_t in, std::size_t out, std::size_t rank,
              double alpha, std::mt19937_64& rng);

  numerics::Parameter a;
  numerics::Parameter b;
  double scaling = 1.0;

  std::size_t rank() const { return a.value.rows(); }
  numerics::Matrix delta() const;
};

// x * (W + delta) computed in factored form: x W + scaling * ((x B) A).
numerics::Matrix apply_adapter(const numerics::Matrix& x, const numerics::Matrix& base,
                               const AdapterPair& adapter);
numerics::Var apply_adapter(numerics::Var x, numerics::Var base, numerics::Tape& tape,
                            AdapterPair& adapter);
// W + delta, the merged weight.
numerics::Matrix merge_adapter(const numerics::Matrix& base, const AdapterPair& adapter);

}  // namespace mtalk::training
