// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef TRANSFR_ERRORS_HPP_
#define TRANSFR_ERRORS_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace transfr {

// Base class for every error raised by the library. The CLI maps these to
// exit code 3 (runtime) except ConfigError, which maps to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class MissingItemError : public Error {
 public:
  using Error::Error;
};

class InsufficientCandidatesError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error("byte offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Raised when an iterative optimizer produces a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error("diverged at epoch " + std::to_string(epoch) + ": " + what),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace transfr

#endif  // TRANSFR_ERRORS_HPP_
