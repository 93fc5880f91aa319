// Copyright 2026 The APE Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ape {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kConfig = 2,
  kProtocol = 3,
  kData = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::kProtocol, what) {}
};

/// Bad input data, failed metric preconditions, storage failures.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::kData, what) {}
};

/// A value outside the domain of a mathematical operation.
class DomainError : public DataError {
 public:
  explicit DomainError(const std::string& what) : DataError(what) {}
};

}  // namespace ape
