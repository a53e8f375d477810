// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace msense {

/// Configuration or input data that fails its declared invariants.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A pipeline stage was requested before its prerequisites exist.
class DependencyError : public std::runtime_error {
  public:
    explicit DependencyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical procedure failed (singular system, undefined value, ...).
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace msense
