#pragma once

#include <stdexcept>
#include <string>

namespace severitas {

/// Base for every error the library raises. `kind()` is a stable,
/// machine-parseable tag used by the CLI's single-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

/// Row-level ingestion failure; carries the 1-based physical line number.
class RowError : public Error {
 public:
  RowError(std::size_t line, const std::string& what)
      : Error("row", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class StratificationError : public Error {
 public:
  explicit StratificationError(const std::string& what) : Error("stratification", what) {}
};

class ResampleError : public Error {
 public:
  explicit ResampleError(const std::string& what) : Error("resample", what) {}
};

class CheckpointError : public Error {
 public:
  explicit CheckpointError(const std::string& what) : Error("checkpoint", what) {}
};

class StageOrderError : public Error {
 public:
  explicit StageOrderError(const std::string& what) : Error("stage_order", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace severitas
