#pragma once

#include <stdexcept>
#include <string>

namespace setgraph {

// Bad input data or out-of-contract arguments.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Training failure (non-finite loss/gradient etc.).
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A condition that indicates a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace setgraph
