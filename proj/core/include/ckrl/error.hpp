#pragma once

#include <stdexcept>
#include <string>

namespace ckrl {

// Base for all toolkit failures. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: flags, config keys, inconsistent options.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data files, impossible sampling requests.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Non-finite loss or energies during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ckrl
