#include "mtalk/lora.hpp"

#include <cmath>

#include "mtalk/errors.hpp"
#include "mtalk/numerics/ops.hpp"

namespace mtalk::training {

using numerics::Matrix;

AdapterPair::AdapterPair(const std::string& name, std::size_t in, std::size_t out,
                         std::size_t rank, double alpha, std::mt19937_64& rng) {
  if (rank == 0) throw DomainError("LoRA rank must be at least 1");
  a = numerics::Parameter(name + ".lora_a",
                          Matrix::uniform(rank, out, 1.0 / std::sqrt(static_cast<double>(out)), rng));
  b = numerics::Parameter(name + ".lora_b", Matrix(in, rank));
  scaling = alpha / static_cast<double>(rank);
}

Matrix AdapterPair::delta() const {
  return numerics::scale(numerics::matmul(b.value, a.value), scaling);
}

namespace {

void check_dims(const Matrix& x, const Matrix& base, const AdapterPair& adapter) {
  if (x.cols() != base.rows()) {
    throw DimensionError("adapter input " + x.shape_string() + " vs base " + base.shape_string());
  }
  if (adapter.b.value.rows() != base.rows() || adapter.a.value.cols() != base.cols()) {
    throw DimensionError("adapter factors do not match base weight " + base.shape_string());
  }
}

}  // namespace

Matrix apply_adapter(const Matrix& x, const Matrix& base, const AdapterPair& adapter) {
  check_dims(x, base, adapter);
  const Matrix low = numerics::matmul(numerics::matmul(x, adapter.b.value), adapter.a.value);
  return numerics::add(numerics::matmul(x, base), numerics::scale(low, adapter.scaling));
}

numerics::Var apply_adapter(numerics::Var x, numerics::Var base, numerics::Tape& tape,
                            AdapterPair& adapter) {
  check_dims(x.value(), base.value(), adapter);
  numerics::Var b = tape.parameter(adapter.b);
  numerics::Var a = tape.parameter(adapter.a);
  numerics::Var low = numerics::matmul(numerics::matmul(x, b), a);
  return numerics::add(numerics::matmul(x, base), numerics::scale(low, adapter.scaling));
}

Matrix merge_adapter(const Matrix& base, const AdapterPair& adapter) {
  return numerics::add(base, adapter.delta());
}

}  // namespace mtalk::training
