#pragma once

#include <stdexcept>
#include <string>

namespace bariflex {

// Every failure raised by the core derives from Error; the C API maps the
// concrete type onto a stable error code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LinkageLocked : public Error {
 public:
  using Error::Error;
};

class SingularTransmission : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class SynthesisFailed : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace bariflex
