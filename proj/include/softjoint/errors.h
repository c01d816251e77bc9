// Copyright 2026 The softjoint Authors
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

#ifndef SOFTJOINT_ERRORS_H_
#define SOFTJOINT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace softjoint {

// Base for every error raised by the library. The CLI maps ConfigError,
// ParseError and SchemaError to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a model function
// (e.g. a Padé denominator that is not positive).
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double value)
      : Error(what), value_(value) {}
  double value() const { return value_; }

 private:
  double value_;
};

// Invalid or inconsistent configuration / parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Well-formed input whose structure violates the schema (e.g. non-uniform
// sample times).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Simulation left its valid region (divergence guard tripped).
class InstabilityError : public Error {
 public:
  using Error::Error;
};

// A tendon was asked to push (negative muscle force).
class SlackError : public Error {
 public:
  using Error::Error;
};

// Requested coordinates or targets lie outside the actuation limits.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Fitting could not produce a feasible result.
class FitError : public Error {
 public:
  using Error::Error;
};

// Too few usable samples for the requested fit.
class InsufficientDataError : public FitError {
 public:
  using FitError::FitError;
};

}  // namespace softjoint

#endif  // SOFTJOINT_ERRORS_H_
