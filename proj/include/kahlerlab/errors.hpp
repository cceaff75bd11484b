#pragma once

#include <stdexcept>
#include <string>

namespace kl {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map it to a configuration exit code in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Division by a jet whose constant term vanishes, or a degenerate metric.
class SingularPointError : public Error {
 public:
  using Error::Error;
};

// Elementary function evaluated outside its domain, or a point outside the
// validity box of an instance.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A derivative of higher order than the jet carries was requested.
class OrderError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SignatureError : public Error {
 public:
  using Error::Error;
};

class ConstructionError : public Error {
 public:
  using Error::Error;
};

class IntegrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace kl
