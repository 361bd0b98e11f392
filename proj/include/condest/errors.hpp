// Copyright 2026 the condest authors
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

#ifndef CONDEST_ERRORS_HPP_
#define CONDEST_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace condest {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed kinetics constants (e.g. zero sigmoid slope).
class InvalidKineticsError : public Error {
 public:
  using Error::Error;
};

/// State / spec dimension mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite derivative or state during integration.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Loss of positive definiteness or other conditioning failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Regressor excitation too weak for the requested solve.
class NotPersistentlyExcitingError : public Error {
 public:
  using Error::Error;
};

/// Bad scenario / model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace condest

#endif  // CONDEST_ERRORS_HPP_
