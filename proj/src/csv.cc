// Copyright 2026 The softjoint Authors
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

#include "softjoint/csv.h"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "softjoint/errors.h"

namespace softjoint::csv {

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

bool ParseDouble(std::string_view field, double* value) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
    field.remove_prefix(1);
  }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                            field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto res =
      std::from_chars(field.data(), field.data() + field.size(), *value);
  return res.ec == std::errc() && res.ptr == field.data() + field.size();
}

std::vector<std::string_view> SplitRow(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

void WriteRow(std::ostream& os, const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (i > 0) os << ',';
    os << FormatDouble(values[i]);
  }
  os << '\n';
}

std::vector<std::vector<double>> ReadTable(
    std::istream& is, const std::vector<std::string>& columns) {
  std::string line;
  int line_no = 0;
  // Header (a UTF-8 byte order mark is tolerated).
  if (!std::getline(is, line)) throw ParseError("empty file: missing header", 1);
  ++line_no;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i > 0) expected += ',';
    expected += columns[i];
  }
  if (line != expected) {
    throw ParseError("bad header '" + line + "', expected '" + expected + "'",
                     line_no);
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = SplitRow(line);
    if (fields.size() != columns.size()) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << columns.size()
          << " fields, got " << fields.size();
      throw ParseError(msg.str(), line_no);
    }
    std::vector<double> row(fields.size());
    for (size_t i = 0; i < fields.size(); ++i) {
      if (!ParseDouble(fields[i], &row[i]) || !std::isfinite(row[i])) {
        std::ostringstream msg;
        msg << "line " << line_no << ": column '" << columns[i]
            << "' has invalid value '" << fields[i] << "'";
        throw ParseError(msg.str(), line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace softjoint::csv
