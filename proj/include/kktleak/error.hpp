#pragma once

#include <stdexcept>
#include <string>

namespace kktleak {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violated an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not agree with the network or dataset.
class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Operation is only defined for univariate networks (input_dim == 1).
class WrongDimension : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A file or document could not be parsed.
class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// The network is degenerate for the requested analysis (for example it is
/// identically zero on the data, or a neuron has zero weights).
class DegenerateNetwork : public Error {
 public:
  using Error::Error;
};

}  // namespace kktleak
