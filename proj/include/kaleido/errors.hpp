#pragma once

#include <stdexcept>
#include <string>

namespace kaleido {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: non-unit normal, negative sigma, bad file contents.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A reflection sequence with a repeated adjacent index or an out-of-range index.
class InvalidSequence : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class BehindCamera : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient linear system, e.g. parallel mirrors or coincident rays.
class Degenerate : public Error {
 public:
  using Error::Error;
};

/// A hypothesis that cannot place its points in front of the camera.
class Infeasible : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// The optimizer was started from a state with a non-finite cost.
class InvalidInitialization : public Error {
 public:
  using Error::Error;
};

}  // namespace kaleido
