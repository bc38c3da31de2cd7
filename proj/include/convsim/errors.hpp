#pragma once

#include <stdexcept>

namespace convsim {

// Invalid configuration or CLI usage (exit status 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or other numeric failures during training.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable, corrupt or version-mismatched serialized data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace convsim
