// Copyright 2026 The circat Authors.
//
// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#pragma once

#include <stdexcept>
#include <string>

namespace circat {

enum class ErrorCode {
  kShapeMismatch = 1,
  kNonFinite = 2,
  kInvalidArgument = 3,
  kIo = 4,
  kUnsupported = 5,
  kInternal = 6,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace circat
