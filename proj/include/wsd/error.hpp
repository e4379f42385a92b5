#pragma once

#include <stdexcept>
#include <string>

namespace wsd {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (corpus XML, gold file, TSV, config, checkpoint bytes).
// The CLI maps these to exit code 2.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a semantic rule (referential integrity,
// duplicate sense keys, config/checkpoint mismatch).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

// (lemma, pos) has no entry in the sense inventory.
class UnknownLemma : public Error {
 public:
  using Error::Error;
};

// (lemma, pos) has no trained per-lemma head.
class UnseenLemma : public Error {
 public:
  using Error::Error;
};

}  // namespace wsd
