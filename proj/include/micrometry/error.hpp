// Copyright 2026 The Micrometry Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace micrometry {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  bad_magic,
  version_mismatch,
  truncated,
  out_of_bounds,
  io,
  decode,
  empty_input,
  localization_failed,
  no_match,
  not_found,
  not_ready,
  unit_mismatch,
  invalid_action,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::out_of_bounds: return "out_of_bounds";
    case ErrorCode::io: return "io";
    case ErrorCode::decode: return "decode";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::localization_failed: return "localization_failed";
    case ErrorCode::no_match: return "no_match";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::not_ready: return "not_ready";
    case ErrorCode::unit_mismatch: return "unit_mismatch";
    case ErrorCode::invalid_action: return "invalid_action";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace micrometry
