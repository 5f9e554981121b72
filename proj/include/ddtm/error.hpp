// Copyright 2026 The DDTM Authors
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

namespace ddtm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, graphs, records).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure: non-finite loss, impossible probability normalizer.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// SMILES syntax or chemistry error with the character offset it was raised at.
class SmilesError : public DataError {
 public:
  SmilesError(const std::string& what, std::size_t offset)
      : DataError(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace ddtm
