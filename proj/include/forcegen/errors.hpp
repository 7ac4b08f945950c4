// Copyright (c) 2026 The forcegen Authors. All rights reserved.
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

namespace forcegen {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied an invalid configuration or argument (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Simulation or training blew up (CLI exit code 3).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class NonFinite : public RuntimeFailure {
 public:
  NonFinite(const std::string& what, std::size_t tick)
      : RuntimeFailure(what + " (tick " + std::to_string(tick) + ")"), tick_(tick) {}
  std::size_t tick() const { return tick_; }

 private:
  std::size_t tick_;
};

class Diverged : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class BadMagic : public Error {
 public:
  using Error::Error;
};

class TruncatedFile : public Error {
 public:
  using Error::Error;
};

}  // namespace forcegen
