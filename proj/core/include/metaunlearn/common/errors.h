// Copyright 2026 The MetaUnlearn Authors.
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

#ifndef METAUNLEARN_COMMON_ERRORS_H_
#define METAUNLEARN_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace metaunlearn {

// Violated precondition on an argument (bad shape, out-of-range index, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value or a linear system could not be
// solved. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration validation failure. `path()` is the dotted key path of the
// offending field. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Thrown when an expression names a primitive the autodiff engine does not
// implement.
class UnsupportedPrimitive : public std::runtime_error {
 public:
  explicit UnsupportedPrimitive(const std::string& name)
      : std::runtime_error("unsupported primitive '" + name + "'"),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

}  // namespace metaunlearn

#endif  // METAUNLEARN_COMMON_ERRORS_H_
