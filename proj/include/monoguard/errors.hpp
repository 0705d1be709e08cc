/* Copyright 2026 The Monoguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MONOGUARD_ERRORS_HPP_
#define MONOGUARD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace monoguard {

// Base for every error raised by the library. kind() is a stable token used
// by the command-line front end in its one-line diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error("parameter", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& what) : Error("split", what) {}
};

class ConstructionError : public Error {
 public:
  explicit ConstructionError(const std::string& what)
      : Error("construction", what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace monoguard

#endif  // MONOGUARD_ERRORS_HPP_
