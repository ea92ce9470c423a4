#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cmarl {

/// Error categories. Values are mirrored by `cmarl_status` in the C API.
enum class ErrorKind : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kIndex = 4,
  kNumerical = 5,
  kAnalysis = 6,
  kBudget = 7,
};

const char* to_string(ErrorKind kind);

/// Base for every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::kInvalidArgument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(ErrorKind::kIndex, what) {}
};

/// Non-finite parameter or input detected during training.
class NumericalFault : public Error {
 public:
  NumericalFault(const std::string& what, std::uint64_t step)
      : Error(ErrorKind::kNumerical, what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

/// Violated analysis precondition (reducible or periodic chain, singular system).
class AnalysisError : public Error {
 public:
  explicit AnalysisError(const std::string& what) : Error(ErrorKind::kAnalysis, what) {}
};

/// Requested table or grid exceeds the configured cell budget.
class BudgetError : public Error {
 public:
  explicit BudgetError(const std::string& what) : Error(ErrorKind::kBudget, what) {}
};

}  // namespace cmarl
