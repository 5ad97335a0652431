#pragma once

#include <stdexcept>
#include <string>

namespace caf {

// Input files or raw text that cannot be parsed (line numbers included
// in the message where available).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally well-formed data that violates a domain invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// A configuration under which the requested computation is undefined,
// e.g. a fairness objective with no cross-group candidates at all.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace caf
