#pragma once

#include <stdexcept>
#include <string>

namespace streamrev {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition on a mathematical domain (e.g. ratio of an empty toolset).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input: unknown clause, bad revision shape, bad request body.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Trace or record fails a structural check (seq gaps, inconsistent counters).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class RegistryError : public Error {
 public:
  using Error::Error;
};

// Operation applied to an act of the wrong reversibility class.
class ClassError : public Error {
 public:
  using Error::Error;
};

class DoubleInvertError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnsupportedPolicyError : public Error {
 public:
  using Error::Error;
};

class UndefinedEffectError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace streamrev
