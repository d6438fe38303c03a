// Copyright 2026 The DGT Authors. All Rights Reserved.
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

#ifndef DGT_ERROR_H_
#define DGT_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgt {

// Root of every error thrown by the library. Callers that only care about
// success/failure catch this; tests match the concrete subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Token id outside the vocabulary.
class UnknownIdError : public Error {
 public:
  using Error::Error;
};

class UnknownDistrictError : public Error {
 public:
  explicit UnknownDistrictError(const std::string& label)
      : Error("unknown district '" + label + "'"), label_(label) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

// Sequence longer than the model's positional capacity.
class LengthError : public Error {
 public:
  using Error::Error;
};

class EmptyReferenceError : public Error {
 public:
  EmptyReferenceError() : Error("reference contains no words") {}
};

// Malformed input file. row is 1-based and counts the header as row 1;
// 0 means the error is not tied to a row.
class ParseError : public Error {
 public:
  // `unit` names what `row` counts in the message ("row", "line").
  ParseError(const std::string& what, std::size_t row, const char* unit = "row")
      : Error(row > 0 ? std::string(unit) + " " + std::to_string(row) + ": " + what : what),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::vector<long long> missing)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<long long>& missing() const { return missing_; }

 private:
  std::vector<long long> missing_;
};

class CheckpointError : public Error {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch, kMalformed };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace dgt

#endif  // DGT_ERROR_H_
