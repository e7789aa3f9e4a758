#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

// Stable error categories; the C API maps these one-to-one onto status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch = 2,
  kMissingExpert = 3,
  kIo = 4,
  kConfig = 5,
  kBadMagic = 6,
  kBadVersion = 7,
  kTruncated = 8,
  kIntegrity = 9,
  kInvariantViolation = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace semcom
