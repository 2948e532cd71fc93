// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gtan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Convolution / pooling geometry that yields an empty output.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf values, failed gradient gates.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of a compute graph (double backward, detached loss, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, dataset content or synthetic spec.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gtan
