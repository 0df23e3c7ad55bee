#pragma once

#include <stdexcept>
#include <string>

namespace tvisvar {

/// Invalid input: bad arguments, malformed files, violated preconditions.
/// The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : ValidationError(what + " (row " + std::to_string(row) + ", column " +
                        std::to_string(column) + ")"),
        row_(row),
        column_(column) {}
  explicit ParseError(const std::string& what) : ValidationError(what) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_ = 0;
  std::size_t column_ = 0;
};

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Failures that occur while computing: factorizations, underflow, I/O.
/// The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptionError : public StoreError {
 public:
  using StoreError::StoreError;
};

class VersionError : public StoreError {
 public:
  using StoreError::StoreError;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace tvisvar
