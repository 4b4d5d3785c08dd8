#pragma once

#include <stdexcept>
#include <string>

namespace velgas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// A (density, momentum) point outside the open set where the chemical
/// potential map can be inverted.
class NotInU : public Error {
 public:
  using Error::Error;
};

class ProfileOutOfRange : public Error {
 public:
  using Error::Error;
};

class NonLatticeVelocity : public Error {
 public:
  using Error::Error;
};

class InvalidJumpLaw : public Error {
 public:
  using Error::Error;
};

class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

class CFLViolation : public Error {
 public:
  using Error::Error;
};

class TestFunctionClassViolation : public Error {
 public:
  using Error::Error;
};

class RegimeMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace velgas
