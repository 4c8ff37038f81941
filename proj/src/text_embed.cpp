// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "uflow/dataset.hpp"

namespace uflow {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

bool token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

std::vector<float> toy_text_embed(std::string_view text) {
  std::vector<double> acc(kTextDim, 0.0);
  std::string token;
  bool any = false;

  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a64(token);
    acc[h % kTextDim] += (h >> 63) ? -1.0 : 1.0;
    any = true;
    token.clear();
  };

  for (unsigned char c : text) {
    if (token_byte(c)) {
      token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
    } else {
      flush();
    }
  }
  flush();

  double norm2 = 0.0;
  for (double v : acc) norm2 += v * v;

  std::vector<float> out(kTextDim);
  // Tokens can cancel in a shared bucket; treat that like the empty case.
  if (!any || norm2 == 0.0) {
    const float c = static_cast<float>(1.0 / std::sqrt(static_cast<double>(kTextDim)));
    std::fill(out.begin(), out.end(), c);
    return out;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (std::size_t i = 0; i < kTextDim; ++i) out[i] = static_cast<float>(acc[i] * inv);
  return out;
}

}  // namespace uflow
