// Copyright (c) the svkit authors
// Licensed under the Apache License, Version 2.0, see LICENSE for details.
// SPDX-License-Identifier: Apache-2.0

#ifndef SVKIT_ERROR_HPP_
#define SVKIT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sv {

// Malformed or inconsistent inputs: bad files, dimension mismatches,
// out-of-range parameters. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown: divergence, singular matrices beyond repair,
// non-finite intermediates. CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sv

#endif  // SVKIT_ERROR_HPP_
