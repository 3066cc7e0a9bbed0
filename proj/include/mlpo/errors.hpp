#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlpo {

// Invalid configuration or malformed input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A language id outside the registry.
class RegistryError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// File could not be loaded, or its shape does not match what the caller expects.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A trainer hit a non-finite loss or update. The CLI maps this to exit code 3.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mlpo
