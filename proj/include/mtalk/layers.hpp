#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mtalk/lora.hpp"
#include "mtalk/numerics/ops.hpp"

namespace mtalk {

using numerics::Matrix;
using numerics::Parameter;
using numerics::Tape;
using numerics::Var;

using ParameterList = std::vector<Parameter*>;

// Default weight scale for a fan-in: uniform(-sqrt(3/fan_in), sqrt(3/fan_in)), which keeps
// unit activation variance through a linear map.
double default_init_scale(std::size_t fan_in);

// y = x W (+ b), optionally with a low-rank adapter on W.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool bias,
         std::mt19937_64& rng);

  Var forward(Tape& tape, Var x);

  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  void zero();
  void set_frozen(bool frozen);
  void attach_adapter(const training::LoraConfig& cfg, std::mt19937_64& rng);
  void collect(ParameterList& out);

  Parameter weight;
  std::optional<Parameter> bias;
  std::optional<training::AdapterPair> adapter;
};

// Projected single-head attention: out(softmax(q(x) k(c)^T / sqrt(H)) v(c)).
class AttentionBlock {
 public:
  AttentionBlock() = default;
  AttentionBlock(const std::string& name, std::size_t width, std::mt19937_64& rng);

  // Returns the out-projected attention output (no residual).
  Var forward(Tape& tape, Var queries, Var context, const Matrix* visible = nullptr,
              Matrix* weights = nullptr);

  void collect(ParameterList& out);

  Linear q, k, v, out;
};

// H -> 4H -> H with gelu between the two affine maps.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t width, std::mt19937_64& rng);

  Var forward(Tape& tape, Var x);
  void collect(ParameterList& out);

  Linear up, down;
};

void set_frozen(const ParameterList& params, bool frozen);

}  // namespace mtalk
