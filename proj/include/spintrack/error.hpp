#pragma once

#include <stdexcept>
#include <string>

namespace spintrack {

/// Input outside the domain of a formula (resonance poles, zero fields, bad shapes).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Malformed or inconsistent experiment configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Singular systems, unstable discretizations, non-finite results. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Corrupt or truncated dataset files.
class IntegrityError : public std::runtime_error {
 public:
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace spintrack
