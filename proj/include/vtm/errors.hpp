// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace vtm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: table lines, corpus files, checkpoints.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or flag combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A training step produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vtm
