#pragma once

#include <stdexcept>
#include <string>

namespace hicl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent taxonomy, corpus, params or database input.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments or missing files in a run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (zero-norm vector, non-finite loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A lookup for something that does not exist (node id, document id).
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace hicl
