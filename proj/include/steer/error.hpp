/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace steer {

// Base class for every error the library raises. `kind()` is a stable
// machine-readable tag used by the CLI when writing error.json.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

// Precondition violations: out-of-range levels, empty inputs, bad percentiles.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

// The case/persona observation graph splits into several components.
class IdentifiabilityError : public DomainError {
 public:
  using DomainError::DomainError;
  const char* kind() const noexcept override { return "identifiability"; }
};

// A rater answered, but the answer cannot be mapped onto the scale.
class RatingError : public Error {
 public:
  RatingError(const std::string& what, std::string raw_payload = {})
      : Error(what), raw_payload_(std::move(raw_payload)) {}
  const char* kind() const noexcept override { return "rating"; }
  const std::string& raw_payload() const noexcept { return raw_payload_; }

 private:
  std::string raw_payload_;
};

// Network-level failure after the retry budget is spent.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  const char* kind() const noexcept override { return "transport"; }
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "template"; }
};

class CacheError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "cache"; }
};

// Selection removed every persona.
class ExtinctionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "extinction"; }
};

// Bad configuration, unreadable files, unknown schema versions.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

// Process exit status for a failure: 2 usage/config, 3 backend, 4 extinction.
inline int exit_code_for(const Error& e) noexcept {
  const std::string_view k = e.kind();
  if (k == "extinction") return 4;
  if (k == "transport" || k == "rating" || k == "cache") return 3;
  return 2;
}

}  // namespace steer
