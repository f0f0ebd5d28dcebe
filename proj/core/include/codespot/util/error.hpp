#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codespot {

// Error categories. The CLI maps kConfig to exit code 2 and everything else
// to exit code 1.
enum class ErrorKind {
  kConfig,      // invalid configuration or argument
  kData,        // malformed or out-of-range input data
  kShape,       // tensor shape mismatch
  kNumeric,     // NaN or Inf produced
  kContract,    // API precondition violated by the caller
  kDigest,      // registry digest mismatch between artifacts
  kIo,          // file could not be read or written
  kTraining,    // optimisation diverged
  kDegenerate,  // input is valid but the statistic is undefined on it
  kDomain,      // arithmetic domain error (e.g. division by zero)
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kDigest: return "digest error";
    case ErrorKind::kIo: return "io error";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kDomain: return "domain error";
  }
  return "error";
}

}  // namespace codespot
