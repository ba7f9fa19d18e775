#ifndef TIDE_ERRORS_HPP
#define TIDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tide {

/// Invalid run configuration (bad key, bad value, missing file).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension mismatch between tensors; the message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed input data; the message carries the offending location.
class IngestError : public std::runtime_error {
 public:
  explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss; carries a diagnostic snapshot.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tide

#endif  // TIDE_ERRORS_HPP
