// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sfa {

/// Base of every error thrown by the library. The CLI maps ValidationError
/// and its subclasses to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// User-facing input problems: malformed files, bad flags, invalid actions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class SequenceError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::string field, std::size_t offset, const std::string& what)
      : ValidationError("parse error in field '" + field + "' at byte " + std::to_string(offset) +
                        ": " + what),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

class UnmappedActionError : public ValidationError {
 public:
  UnmappedActionError(const std::string& space, const std::string& kind)
      : ValidationError("unmapped action kind '" + kind + "' in source space " + space),
        kind_(kind) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Raised for data-level contract breaks in corpora and training inputs
/// (missing thought annotation, no Slow samples, malformed record).
class DataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Paired inputs (predictions, labels) of different lengths.
class AlignmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace sfa
