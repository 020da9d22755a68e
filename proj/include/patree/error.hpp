// Copyright 2026 The patree Authors
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

#include <stdexcept>
#include <string>

namespace patree {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map the category onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain: theta outside its box, k = 0,
// lambda in the divergent region, malformed family description.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Iterative procedure (root finder, optimizer, quadrature) did not reach its
// tolerance within the iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Data violates a structural invariant, e.g. a growth history that would
// drive some degree count negative, or a corrupt file.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Not enough information in the data, e.g. a ratio N_{>k}/N_k with N_k = 0.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A series could not be truncated within the requested error.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// Singular or non-positive-definite matrix where one was required.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

}  // namespace patree
