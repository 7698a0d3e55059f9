#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace condsub {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV content, schema, target type).
class DataError : public Error {
 public:
  using Error::Error;
};

enum class LoadErrorKind {
  io,
  missing_header,
  missing_value,
  ragged_row,
  unparseable_cell,
  duplicate_column,
  schema,
};

/// CSV ingestion failure. `row` and `column` are 1-based data coordinates
/// (header excluded) when the error is tied to a cell, 0 otherwise.
class LoadError : public DataError {
 public:
  LoadError(LoadErrorKind kind, const std::string& message, std::size_t row = 0,
            std::size_t column = 0)
      : DataError(message), kind_(kind), row_(row), column_(column) {}

  LoadErrorKind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  LoadErrorKind kind_;
  std::size_t row_;
  std::size_t column_;
};

/// A categorical level reached a split node that never saw it during fitting.
class UnseenLevelError : public DataError {
 public:
  UnseenLevelError(const std::string& column, const std::string& level)
      : DataError("unseen level '" + level + "' of column '" + column + "' at split node"),
        column_(column),
        level_(level) {}

  const std::string& column() const noexcept { return column_; }
  const std::string& level() const noexcept { return level_; }

 private:
  std::string column_;
  std::string level_;
};

/// Model fitting or prediction failure (rank deficiency, bad hyperparameters).
class ModelError : public Error {
 public:
  using Error::Error;
};

enum class BridgeErrorKind {
  spawn,
  handshake,
  process_exit,
  malformed_line,
  count_mismatch,
  timeout,
};

/// Failure talking to an external prediction subprocess.
class BridgeError : public ModelError {
 public:
  BridgeError(BridgeErrorKind kind, const std::string& message)
      : ModelError(message), kind_(kind) {}

  BridgeErrorKind kind() const noexcept { return kind_; }

 private:
  BridgeErrorKind kind_;
};

}  // namespace condsub
