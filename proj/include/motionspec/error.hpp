#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace motionspec {

enum class ErrorCode {
  InvalidArgument,
  DataError,
  DimensionMismatch,
  IoError,
  NotFound,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every module. The code is what callers branch on;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace motionspec
