// Copyright 2026 The evgbm Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVGBM_IO_HPP_
#define EVGBM_IO_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evgbm::io {

/// Throws DataError if the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);
/// Throws DataError if the file cannot be written.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// RFC-4180 field quoting (only when needed).
std::string csv_field(std::string_view s);
std::string csv_line(std::span<const std::string> fields);

/// Splits CSV text into records of fields; handles quoted fields, doubled
/// quotes and CRLF line ends. Blank lines are skipped. Each record keeps
/// its 1-based line number.
struct CsvRecord {
  std::size_t line;
  std::vector<std::string> fields;
};
std::vector<CsvRecord> parse_csv(std::string_view text);

}  // namespace evgbm::io

#endif  // EVGBM_IO_HPP_
