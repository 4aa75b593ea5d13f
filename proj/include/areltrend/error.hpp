// Copyright 2026 The areltrend Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS-IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace areltrend {

// Exception hierarchy. Each category maps onto one CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

// Malformed or unreadable input (files, flags, value ranges).
class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

// Inputs that parse but disagree on units, periods or sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

// Factorization failure or another invalid numerical state.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

// A run directory is missing files or does not support the request.
class IncompleteRunError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 5; }
};

// Rethrows the exception being handled with `context` prefixed to its message,
// keeping its category. Call only from inside a catch block.
[[noreturn]] inline void rethrow_with_context(std::string_view context) {
  const std::string prefix = std::string(context) + ": ";
  try {
    throw;
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const IncompleteRunError& e) {
    throw IncompleteRunError(prefix + e.what());
  } catch (const std::exception& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace areltrend
