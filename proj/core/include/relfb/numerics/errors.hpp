#pragma once

#include <stdexcept>
#include <string>

namespace relfb {

/// Shapes or extents that do not fit an operation's contract.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared in an operation's output.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported file content (WAV, feature files, checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration. `field()` names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(field + ": " + what),
        field_(std::move(field)),
        message_(what) {}
  const std::string& field() const noexcept { return field_; }
  /// The description without the field prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

}  // namespace relfb
