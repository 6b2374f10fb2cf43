/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace osmosis {

/// Base class for all library failures. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, argument or precondition (CLI exit 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable, or tampered artifact (CLI exit 3).
class ArtifactError : public Error {
 public:
  ArtifactError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Numerical failure during an optimization loop (CLI exit 4).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& stage, std::int64_t index)
      : Error(stage + ": non-finite loss at index " + std::to_string(index)),
        index_(index) {}
  std::int64_t index() const noexcept { return index_; }

 private:
  std::int64_t index_;
};

/// Throws ConfigError with `message` unless `condition` holds.
void require(bool condition, const std::string& message);

}  // namespace osmosis
