// Copyright (c) 2026, The GALW Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace galw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Class label or index out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's mathematical domain (e.g. log of x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace galw
