// Copyright 2026 The areltrend Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace areltrend::csv {

// Minimal RFC-4180 reader: quoted fields, doubled quotes, CRLF tolerant.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  // Column index by name; throws InputError naming the file if absent.
  int column(std::string_view name, const std::filesystem::path& source) const;
};

Table read(const std::filesystem::path& path);
std::vector<std::string> split_line(std::string_view line);

double parse_double(std::string_view text, const std::filesystem::path& source, int line);
long long parse_int(std::string_view text, const std::filesystem::path& source, int line);

// Shortest text that round-trips the double exactly.
std::string format_double(double value);

// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace areltrend::csv
