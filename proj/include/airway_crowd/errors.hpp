#pragma once

#include <stdexcept>
#include <string>

namespace airway_crowd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Referenced entity (file, image, HIT) does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Operation conflicts with stored state (e.g. duplicate submission).
class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace airway_crowd
