#include "mtalk/layers.hpp"

#include <cmath>

#include "mtalk/errors.hpp"

namespace mtalk {

double default_init_scale(std::size_t fan_in) {
  return std::sqrt(3.0 / static_cast<double>(fan_in));
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias,
               std::mt19937_64& rng)
    : weight(name + ".w", Matrix::uniform(in, out, default_init_scale(in), rng)) {
  if (with_bias) bias.emplace(name + ".b", Matrix(1, out));
}

Var Linear::forward(Tape& tape, Var x) {
  if (x.cols() != in_features()) {
    throw DimensionError(weight.name + ": input width " + std::to_string(x.cols()) +
                         ", expected " + std::to_string(in_features()));
  }
  Var w = tape.parameter(weight);
  Var y = adapter ? training::apply_adapter(x, w, tape, *adapter) : numerics::matmul(x, w);
  if (bias) y = numerics::add_row_bias(y, tape.parameter(*bias));
  return y;
}

void Linear::zero() {
  weight.value.fill(0.0);
  if (bias) bias->value.fill(0.0);
}

void Linear::set_frozen(bool frozen) {
  weight.frozen = frozen;
  if (bias) bias->frozen = frozen;
}

void Linear::attach_adapter(const training::LoraConfig& cfg, std::mt19937_64& rng) {
  adapter.emplace(weight.name.substr(0, weight.name.size() - 2), in_features(), out_features(),
                  cfg.rank, cfg.alpha, rng);
}

void Linear::collect(ParameterList& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
  if (adapter) {
    out.push_back(&adapter->a);
    out.push_back(&adapter->b);
  }
}

AttentionBlock::AttentionBlock(const std::string& name, std::size_t width, std::mt19937_64& rng)
    : q(name + ".q", width, width, false, rng),
      k(name + ".k", width, width, false, rng),
      v(name + ".v", width, width, false, rng),
      out(name + ".out", width, width, false, rng) {}

Var AttentionBlock::forward(Tape& tape, Var queries, Var context, const Matrix* visible,
                            Matrix* weights) {
  const auto attn = numerics::scaled_dot_attention(q.forward(tape, queries),
                                                   k.forward(tape, context),
                                                   v.forward(tape, context), visible);
  if (weights) *weights = attn.weights.value();
  return out.forward(tape, attn.output);
}

void AttentionBlock::collect(ParameterList& params) {
  q.collect(params);
  k.collect(params);
  v.collect(params);
  out.collect(params);
}

FeedForward::FeedForward(const std::string& name, std::size_t width, std::mt19937_64& rng)
    : up(name + ".up", width, 4 * width, true, rng),
      down(name + ".down", 4 * width, width, true, rng) {}

Var FeedForward::forward(Tape& tape, Var x) {
  return down.forward(tape, numerics::gelu(up.forward(tape, x)));
}

void FeedForward::collect(ParameterList& params) {
  up.collect(params);
  down.collect(params);
}

void set_frozen(const ParameterList& params, bool frozen) {
  for (Parameter* p : params) p->frozen = frozen;
}

}  // namespace mtalk
