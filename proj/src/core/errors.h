// Copyright 2026 The lbcem Authors
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

#ifndef LBCEM_CORE_ERRORS_H_
#define LBCEM_CORE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace lbcem {

// Bad configuration or a violated precondition on user-supplied values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Floating point breakdown inside a controller or model.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GimbalLockError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Operation invoked on an object in the wrong state (e.g. adding to a full
// dataset).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// File missing, unreadable or unwritable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SafetyViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbcem

#endif  // LBCEM_CORE_ERRORS_H_
