// Copyright 2026 The ERU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eru/error.hpp"

namespace eru {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format_error";
    case ErrorKind::kValidation: return "validation_error";
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kIo: return "io_error";
    case ErrorKind::kShape: return "shape_error";
    case ErrorKind::kNumeric: return "numeric_error";
    case ErrorKind::kResource: return "resource_error";
  }
  return "error";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return 3;
    case ErrorKind::kFormat: return 4;
    case ErrorKind::kValidation: return 5;
    case ErrorKind::kConfig: return 6;
    case ErrorKind::kShape: return 7;
    case ErrorKind::kNumeric: return 8;
    case ErrorKind::kResource: return 9;
  }
  return 1;
}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace eru
