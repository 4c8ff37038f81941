// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/adam.hpp"

#include <cmath>

#include "uflow/error.hpp"

namespace uflow {

AdamState AdamState::zeros(const PoolerConfig& config) {
  return {PoolerParams<float>::zeros(config), PoolerParams<float>::zeros(config), 0};
}

void adam_step(PoolerParams<float>& params, const PoolerParams<float>& grads, AdamState& state,
               const AdamConfig& config) {
  if (!(params.config == grads.config) || !(params.config == state.m.config))
    fail(Errc::usage, "adam_step: parameter, gradient and state shapes differ");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);

  auto theta = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].values.size(); ++i) {
      const double gi = g[k].values[i];
      const double mi = config.beta1 * m[k].values[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[k].values[i] + (1.0 - config.beta2) * gi * gi;
      m[k].values[i] = static_cast<float>(mi);
      v[k].values[i] = static_cast<float>(vi);
      const double update = config.lr * (mi / bc1) / (std::sqrt(vi / bc2) + config.eps);
      theta[k].values[i] = static_cast<float>(theta[k].values[i] - update);
    }
  }
}

}  // namespace uflow
