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

#ifndef SOFTJOINT_CSV_H_
#define SOFTJOINT_CSV_H_

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace softjoint::csv {

// Shortest decimal string that round-trips to the same double.
std::string FormatDouble(double value);

// Strict parse of a full field; returns false on trailing junk, empty input
// or out-of-range values. "nan" / "inf" parse but are not finite.
bool ParseDouble(std::string_view field, double* value);

std::vector<std::string_view> SplitRow(std::string_view line);

void WriteRow(std::ostream& os, const std::vector<double>& values);

// Reads a numeric table with the exact header `columns`. Throws ParseError
// naming the 1-based line of the first malformed or non-finite row.
std::vector<std::vector<double>> ReadTable(
    std::istream& is, const std::vector<std::string>& columns);

}  // namespace softjoint::csv

#endif  // SOFTJOINT_CSV_H_
