#pragma once

#include <stdexcept>
#include <string>

namespace scaffold {

// Failure classes surfaced by the harness; each maps to a distinct exit code.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kNumerical = 4;
}  // namespace exit_code

}  // namespace scaffold
