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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace panelforge {

// Root of the library's exception hierarchy. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or record. Row numbers are 1-based and count the
// header line, so they match what an editor shows.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t row, const std::string& what)
      : Error(source + ":" + std::to_string(row) + ": " + what), source_(source), row_(row) {}

  const std::string& source() const { return source_; }
  std::size_t row() const { return row_; }

 private:
  std::string source_;
  std::size_t row_;
};

// A record violates a domain invariant (duplicate id, rank out of range...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller passed an argument outside the operation's contract.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A quantity is mathematically undefined for the given data (zero baseline,
// zero-variance column, singular matrix, df = 0 index...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The model specification itself is invalid (cyclic paths, too few waves,
// unstable simulation parameters, non-identified model).
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace panelforge
