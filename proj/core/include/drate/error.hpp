#pragma once

#include <stdexcept>
#include <string>

namespace drate {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (scenario files, kernel settings, CLI manifests).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A nuisance model could not be fitted or evaluated.
class FitError : public Error {
 public:
  enum class Kind {
    DegenerateTarget,
    Separation,
    RankDeficient,
    EmptyArm,
    NonFinite,
    OutOfRange,
  };

  FitError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace drate
