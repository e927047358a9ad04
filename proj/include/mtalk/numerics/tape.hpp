#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mtalk/numerics/matrix.hpp"

namespace mtalk::numerics {

// A trainable (or frozen) weight block. Frozen parameters never receive gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  std::string name;
  Matrix value;
  Matrix grad;
  bool frozen = false;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Multiply-accumulate instrumentation. Disabled by default; when enabled every
// matmul adds m*k*n and every softmax adds rows*cols, attributed to the total and
// to the innermost open section.
class MacCounter {
 public:
  class Section {
   public:
    Section(MacCounter& counter, std::string label);
    ~Section();
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

   private:
    MacCounter& counter_;
  };

  void enable() { enabled_ = true; }
  void disable() { enabled_ = false; }
  bool enabled() const { return enabled_; }
  void reset();

  void add(std::uint64_t macs);
  // Throws StateError when the counter was never enabled.
  std::uint64_t total() const;
  std::uint64_t section(const std::string& label) const;
  const std::map<std::string, std::uint64_t>& sections() const { return sections_; }

 private:
  bool enabled_ = false;
  std::uint64_t total_ = 0;
  std::vector<std::string> open_;
  std::map<std::string, std::uint64_t> sections_;
};

// Records primitive operations of one forward pass and replays them in reverse.
// A tape supports exactly one backward sweep; call clear() to reuse it.
class Tape {
 public:
  // Receives the gradient of the node's output; accumulates into its inputs.
  using Reverse = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(Parameter& p);
  Var record(Matrix value, const std::vector<Var>& inputs, Reverse reverse);

  // Seeds d(loss)/d(loss) = 1 on a 1x1 node and sweeps in reverse recording order.
  // Parameter gradients are accumulated (+=) into Parameter::grad.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  bool needs_grad(Var v) const;
  // Adds `grad` into the adjoint of `input` if it participates in differentiation.
  void accumulate(Var input, const Matrix& grad);
  // Adjoint of a node after backward; zero matrix if none flowed.
  Matrix gradient(Var v) const;

  MacCounter& macs() { return macs_; }
  const MacCounter& macs() const { return macs_; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    Reverse reverse;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  void check_owned(Var v, const char* what) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
  MacCounter macs_;
};

}  // namespace mtalk::numerics
