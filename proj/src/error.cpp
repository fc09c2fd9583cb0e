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

#include "nlcdet/error.hpp"

namespace nlcdet {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kUnderdetermined: return "Underdetermined";
    case ErrorCode::kEmptyForeground: return "EmptyForeground";
    case ErrorCode::kLabelError: return "LabelError";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kMalformedMatrix: return "MalformedMatrix";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kDegenerateCalib: return "DegenerateCalib";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, int line, int column)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code),
      line_(line),
      column_(column) {}

}  // namespace nlcdet
