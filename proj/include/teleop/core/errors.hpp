#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace teleop {

// Base of every error raised by the library. Callers that only need to report
// a failure can catch this; the subclasses exist so tests and the CLI can tell
// configuration problems from numerical ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateQuaternion : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NotEnoughData : public Error {
 public:
  using Error::Error;
};

class SingularRegression : public Error {
 public:
  using Error::Error;
};

class HorizonOutOfRange : public Error {
 public:
  using Error::Error;
};

class InstrumentationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class EmptyEpisode : public Error {
 public:
  using Error::Error;
};

class Stage2Timeout : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace teleop
