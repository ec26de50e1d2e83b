// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fed {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Object used before it was set up (e.g. memory banks before init).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint parse failure or architecture mismatch.
class LoadError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Evaluation protocol violation, e.g. a query without gallery matches.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace fed
