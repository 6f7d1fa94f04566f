// Copyright 2026 The panelforge Authors
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

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace panelforge {

using Date = std::chrono::year_month_day;

// Strict ISO "YYYY-MM-DD". Throws ArgumentError on anything else.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);
Date day_before(const Date& d);

// Minimal RFC-4180 style field splitting: double quotes delimit fields that
// contain commas or quotes; "" inside a quoted field is a literal quote.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view value);

// Shortest decimal text that parses back to the same double.
std::string format_roundtrip(double value);
// Fixed notation with `digits` decimals ("%.6f" style, locale independent).
std::string format_fixed(double value, int digits);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace panelforge
