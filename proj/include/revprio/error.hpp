#pragma once

#include <stdexcept>
#include <string>

namespace revprio {

// Base for everything the library throws. The CLI maps ValidationError to
// exit code 2 and every other Error to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage ran before the stage that produces its inputs.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace revprio
