/*
 * Copyright 2026 The DIPW Authors.
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

#ifndef DIPW_COMMON_H_
#define DIPW_COMMON_H_

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dipw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Version tag written into every JSON/CSV artifact the library emits.
inline constexpr int kFormatVersion = 1;

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument value or shape (caller bug or bad flag).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Input data violates a Dataset invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A required column or config key is missing.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Numerical degeneracy (singular Gram matrix, empty treatment arm, ...).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Operation not available for this model kind or data mode.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace dipw

#endif  // DIPW_COMMON_H_
