// Copyright 2026 The detbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace detbench {

/// Base of every error raised by the toolkit. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed annotation, detection, timing or config text.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  explicit ParseError(const std::string& what) : ParseError(what, 0) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// A kernel or routine received parameters outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An asset cannot be placed inside the top band of a background.
class UnplaceableError : public Error {
 public:
  using Error::Error;
};

/// Average precision requested over a dataset without ground-truth objects.
class UndefinedApError : public Error {
 public:
  using Error::Error;
};

/// Train/validation data overlaps a test set.
class LeakError : public Error {
 public:
  using Error::Error;
};

/// File system or image codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace detbench
