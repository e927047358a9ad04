#pragma once

#include <stdexcept>
#include <string>

namespace mtalk {

// Shape/size disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Argument outside the operation's domain (empty ranges, zero totals, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Operation invoked in the wrong lifecycle state.
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mtalk
