#pragma once

#include <stdexcept>
#include <string>

namespace irwbc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Model or configuration violates a structural/physical invariant. The
/// message names the offending element.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SingularMassMatrix : public Error {
 public:
  using Error::Error;
};

class UnknownFrame : public Error {
 public:
  explicit UnknownFrame(const std::string& name)
      : Error("unknown frame '" + name + "'"), frame_(name) {}
  const std::string& frame() const noexcept { return frame_; }

 private:
  std::string frame_;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteData : public Error {
 public:
  using Error::Error;
};

class SingularWeight : public Error {
 public:
  using Error::Error;
};

/// The shortest rotation between two antipodal axes is not unique.
class UndefinedShortestRotation : public Error {
 public:
  using Error::Error;
};

class RankDeficientTilt : public Error {
 public:
  using Error::Error;
};

class ControllerInfeasible : public Error {
 public:
  using Error::Error;
};

class NumericalBlowup : public Error {
 public:
  using Error::Error;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace irwbc
