#pragma once

#include <stdexcept>
#include <string>

namespace adc {

/// Malformed on-disk data: bad magic, truncated payload, unparseable JSON.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// A domain invariant does not hold (degenerate box, shape mismatch, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Procedural generation could not satisfy its constraints.
class GenerationError : public ValidationError {
public:
    explicit GenerationError(const std::string& what) : ValidationError(what) {}
};

}  // namespace adc
