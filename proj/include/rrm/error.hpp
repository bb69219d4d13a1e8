#pragma once

#include <stdexcept>
#include <string>

namespace rrm {

enum class ErrorCode {
  invalid_argument = 1,
  shape,
  empty_batch,
  divergence,
  parse,
  protocol,
  stale_policy,
  not_ready,
  io,
};

/// Base exception for every failure raised by the library. The code maps
/// one-to-one onto the status values of the C interface.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rrm
