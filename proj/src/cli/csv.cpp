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

#include "nlcdet/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "nlcdet/error.hpp"

namespace nlcdet::cli {
namespace {

struct Field {
  std::string_view text;
  int column = 0;
};

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<Field> SplitFields(std::string_view line) {
  std::vector<Field> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    const std::string_view raw = line.substr(start, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - start);
    std::size_t lead = 0;
    while (lead < raw.size() && (raw[lead] == ' ' || raw[lead] == '\t')) ++lead;
    fields.push_back({Trim(raw), static_cast<int>(start + lead + 1)});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool LooksNumeric(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

double ToReal(const Field& f, int line) {
  std::string_view s = f.text;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kParseError,
                "expected a finite number, got '" + std::string(f.text) + "'", line,
                f.column);
  }
  return v;
}

int ToInt(const Field& f, int line) {
  int v = 0;
  const std::string_view s = f.text;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParseError,
                "expected an integer, got '" + std::string(f.text) + "'", line, f.column);
  }
  return v;
}

// Calls `row(fields, line)` for each data row with exactly `width` fields.
template <typename RowFn>
void ForEachRow(std::string_view text, std::size_t width, RowFn row) {
  int line = 0;
  bool first_content = true;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line;
    const std::string_view trimmed = Trim(raw);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    std::vector<Field> fields = SplitFields(raw);
    const bool header = first_content && !LooksNumeric(fields.front().text);
    first_content = false;
    if (header) continue;
    if (fields.size() != width) {
      throw Error(ErrorCode::kParseError,
                  "expected " + std::to_string(width) + " fields, got " +
                      std::to_string(fields.size()),
                  line, 1);
    }
    row(fields, line);
  }
}

Box3D BoxFromFields(const std::vector<Field>& f, int line) {
  const Vec3 center(ToReal(f[0], line), ToReal(f[1], line), ToReal(f[2], line));
  const double l = ToReal(f[3], line);
  const double w = ToReal(f[4], line);
  const double h = ToReal(f[5], line);
  for (int i = 3; i < 6; ++i) {
    if (!(ToReal(f[static_cast<std::size_t>(i)], line) > 0.0)) {
      throw Error(ErrorCode::kParseError, "box dimensions must be positive", line,
                  f[static_cast<std::size_t>(i)].column);
    }
  }
  return Box3D(center, l, w, h, ToReal(f[6], line));
}

}  // namespace

std::vector<Correspondence> ParseCorrespondencesCsv(std::string_view text) {
  std::vector<Correspondence> corrs;
  ForEachRow(text, 6, [&](const std::vector<Field>& f, int line) {
    corrs.push_back({Vec3(ToReal(f[0], line), ToReal(f[1], line), ToReal(f[2], line)),
                     NlcValue(ToReal(f[3], line), ToReal(f[4], line), ToReal(f[5], line))});
  });
  return corrs;
}

std::vector<Detection> ParseDetectionsCsv(std::string_view text) {
  std::vector<Detection> dets;
  ForEachRow(text, 9, [&](const std::vector<Field>& f, int line) {
    dets.push_back({BoxFromFields(f, line), ToReal(f[7], line), ToInt(f[8], line)});
  });
  return dets;
}

GroundTruthTable ParseGroundTruthCsv(std::string_view text) {
  GroundTruthTable table;
  ForEachRow(text, 8, [&](const std::vector<Field>& f, int line) {
    table.boxes.push_back(BoxFromFields(f, line));
    table.classes.push_back(ToInt(f[7], line));
  });
  return table;
}

}  // namespace nlcdet::cli
