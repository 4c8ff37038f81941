// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/error.hpp"

namespace uflow {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::usage: return "usage";
    case Errc::format: return "format";
    case Errc::numeric: return "numeric";
    case Errc::io: return "io";
    case Errc::not_found: return "not_found";
    case Errc::provider: return "provider";
  }
  return "unknown";
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::usage: return 2;
    case Errc::format:
    case Errc::not_found: return 3;
    case Errc::numeric: return 4;
    case Errc::io:
    case Errc::provider: return 5;
  }
  return 1;
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace uflow
