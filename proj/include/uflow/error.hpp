// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uflow {

/// Error categories. The numeric value of the first five is the CLI exit code.
enum class Errc {
  usage = 2,
  format = 3,
  numeric = 4,
  io = 5,
  not_found = 6,
  provider = 7,
};

std::string_view errc_name(Errc code);

/// Process exit code for an error category (0 is never returned).
int exit_code(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace uflow
