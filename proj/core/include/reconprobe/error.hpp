#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace reconprobe {

// Base for every error the library raises. The CLI maps the subclasses onto
// process exit codes (see pipeline.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration: manifests, rasters, distributions, ...
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Unreadable / unwritable files and malformed file contents.
class IoError : public Error {
 public:
  using Error::Error;
};

// One or more files that an external model runner was expected to produce are
// absent. `missing()` lists them, in a stable order.
class MissingInputError : public Error {
 public:
  explicit MissingInputError(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

// A pipeline stage failed after its inputs were validated.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace reconprobe
