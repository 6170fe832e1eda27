#pragma once

#include <stdexcept>
#include <string>

namespace dataloop {

// Root of every typed failure raised by the engine. Module headers derive
// their own error kinds from this so callers can catch at either level.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A model response that parsed as JSON but does not match the expected record
// shape, or a persisted record that fails to load.
class SchemaInvalid : public Error {
 public:
  using Error::Error;
};

}  // namespace dataloop
