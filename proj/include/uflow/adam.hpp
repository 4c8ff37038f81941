// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "uflow/pooler.hpp"

namespace uflow {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  PoolerParams<float> m;
  PoolerParams<float> v;
  std::uint64_t step = 0;

  static AdamState zeros(const PoolerConfig& config);
};

/// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(PoolerParams<float>& params, const PoolerParams<float>& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace uflow
