#include "mtalk/numerics/tape.hpp"

#include "mtalk/errors.hpp"

namespace mtalk::numerics {

Parameter::Parameter(std::string name_, Matrix value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

const Matrix& Var::value() const {
  if (!tape_) throw StateError("value() on an unbound Var");
  return tape_->value(*this);
}

MacCounter::Section::Section(MacCounter& counter, std::string label) : counter_(counter) {
  counter_.open_.push_back(std::move(label));
}

MacCounter::Section::~Section() { counter_.open_.pop_back(); }

void MacCounter::reset() {
  total_ = 0;
  sections_.clear();
}

void MacCounter::add(std::uint64_t macs) {
  if (!enabled_) return;
  total_ += macs;
  if (!open_.empty()) sections_[open_.back()] += macs;
}

std::uint64_t MacCounter::total() const {
  if (!enabled_) throw StateError("MAC counter is disabled");
  return total_;
}

std::uint64_t MacCounter::section(const std::string& label) const {
  if (!enabled_) throw StateError("MAC counter is disabled");
  const auto it = sections_.find(label);
  return it == sections_.end() ? 0 : it->second;
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, {}, &p, !p.frozen});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Reverse reverse) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in, "record");
    node.inputs.push_back(in.id());
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (node.needs_grad) node.reverse = std::move(reverse);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v, const char* what) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw StateError(std::string(what) + ": variable does not belong to this tape");
  }
}

const Matrix& Tape::value(Var v) const {
  check_owned(v, "value");
  return nodes_[v.id()].value;
}

bool Tape::needs_grad(Var v) const {
  check_owned(v, "needs_grad");
  return nodes_[v.id()].needs_grad;
}

void Tape::accumulate(Var input, const Matrix& grad) {
  Node& node = nodes_[input.id()];
  if (!node.needs_grad) return;
  if (!grad.same_shape(node.value)) {
    throw DimensionError("gradient shape " + grad.shape_string() + " does not match value " +
                         node.value.shape_string());
  }
  if (node.grad.empty() && !node.value.empty()) {
    node.grad = grad;
  } else {
    for (std::size_t i = 0; i < grad.size(); ++i) node.grad.data()[i] += grad.data()[i];
  }
}

Matrix Tape::gradient(Var v) const {
  check_owned(v, "gradient");
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Matrix(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward without a recorded forward pass");
  check_owned(loss, "backward");
  if (consumed_) throw StateError("backward already ran on this tape; record a new forward");
  const Matrix& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  consumed_ = true;
  nodes_[loss.id()].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.param) {
      Parameter& p = *node.param;
      if (p.frozen) continue;
      if (p.grad.empty() && !p.value.empty()) p.grad = Matrix(p.value.rows(), p.value.cols());
      for (std::size_t k = 0; k < node.grad.size(); ++k) p.grad.data()[k] += node.grad.data()[k];
    } else if (node.reverse) {
      // The node's grad must stay alive while reverse reads it.
      const Matrix out_grad = node.grad;
      node.reverse(*this, out_grad);
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
  macs_.reset();
}

}  // namespace mtalk::numerics
