#pragma once

#include <stdexcept>
#include <string>

namespace mirrorsim {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Domain,
  Threshold,
  Divergence,
  Fit,
  Calibration,
  Io,
  InsufficientData,
};

// Single exception type for the library; the code selects the C API status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace mirrorsim
