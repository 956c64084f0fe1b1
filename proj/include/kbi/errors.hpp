#pragma once

#include <stdexcept>
#include <string>

namespace kbi {

/// Malformed input: dimension mismatch, invalid parameter, non-SPD matrix.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested combination has no closed form in this library.
class CapabilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A linear system could not be solved to usable accuracy.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An experiment or CLI configuration is invalid. `field` names the
/// offending dotted path when one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace kbi
