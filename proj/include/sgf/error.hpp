/*
 * Copyright 2026 The sgformer-cpp Authors
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

#include <stdexcept>
#include <string>

namespace sgf {

// Base of every error raised by the library. The CLI maps the subclasses onto
// its exit-code taxonomy (1 runtime, 2 config, 3 data).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, bad flags, inconsistent options.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent dataset / checkpoint contents.
class DataError : public Error {
public:
    using Error::Error;
};

// Binary format violations (bad magic, version, truncation).
class FormatError : public DataError {
public:
    using DataError::DataError;
};

// Shape mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A denominator fell below eps_div, or a non-finite value appeared.
class NumericError : public Error {
public:
    using Error::Error;
};

// Smallest admissible denominator (Frobenius norms, attention row sums).
inline constexpr double kEpsDiv = 1e-12;

} // namespace sgf
