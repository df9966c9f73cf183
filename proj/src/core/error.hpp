#pragma once

#include <stdexcept>
#include <string>

namespace ents {

enum class ErrorCode {
  InvalidArgument = 1,
  NotPositiveDefinite,
  EnsembleCollapse,
  InsufficientMembers,
  NonFinite,
  Io,
  Config,
};

// Every failure raised by the library carries one of the codes above so the
// C boundary can translate it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ents
