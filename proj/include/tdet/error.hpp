// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tdet {

enum class ErrorCode {
  kInvalidArgument = 1,
  kDegenerateSegment,
  kEmptyRegion,
  kShapeMismatch,
  kIo,
  kParse,
  kValidation,
  kDiverged,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define TDET_CHECK(cond, code, msg)                     \
  do {                                                  \
    if (!(cond)) throw ::tdet::Error((code), (msg));    \
  } while (0)

}  // namespace tdet
