// Copyright (c) 2026 The nlcdet Authors. All Rights Reserved.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlcdet {

enum class ErrorCode {
  kInvalidArgument,
  kShapeError,
  kBehindCamera,
  kUnderdetermined,
  kEmptyForeground,
  kLabelError,
  kMissingField,
  kMalformedMatrix,
  kParseError,
  kTruncatedFile,
  kDegenerateCalib,
  kBadMagic,
  kUnsupportedVersion,
  kIoError,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every library failure is reported as an Error carrying a structured code.
// Parse failures additionally carry a 1-based line and column (0 = unknown).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, int line = 0,
        int column = 0);

  ErrorCode code() const { return code_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  ErrorCode code_;
  int line_;
  int column_;
};

}  // namespace nlcdet
