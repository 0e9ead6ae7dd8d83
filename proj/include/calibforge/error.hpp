// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calibforge {

// Bad argument to a library operation (empty input, shape mismatch, M = 0, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numeric-domain failure that clamping could not prevent.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed value in a data or model file. line() is 1-based; 0 when unknown.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Structurally wrong file (wrong column count, bad header, wrong version tag).
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pipeline step needs an artifact an earlier step has not produced.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace calibforge
