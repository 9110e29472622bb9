#pragma once

#include <stdexcept>
#include <string>

namespace dnc {

// Values double as CLI exit codes where they overlap (2, 3, 4).
enum class ErrorCode {
  ok = 0,
  invalid_argument = 1,
  config = 2,
  divergence = 3,
  numerical = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::invalid_argument, what);
}

}  // namespace dnc
