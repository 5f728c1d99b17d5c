// Copyright 2026 The Specmetric Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPECMETRIC_ERROR_HPP_
#define SPECMETRIC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace specmetric {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent inputs: malformed files, bad configs, shape
// mismatches, out-of-range values. CLI maps these to exit code 2.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

// Numerical failures: divergence, non-finite values, degenerate statistics.
// CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace specmetric

#endif  // SPECMETRIC_ERROR_HPP_
