// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// Attention-pooling head: per-screen projection, learnable positional
// embeddings, single-query multi-head attention under a padding mask,
// layer norms, MLP and output projection.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uflow/dataset.hpp"
#include "uflow/matrix.hpp"

namespace uflow {

struct PoolerConfig {
  std::size_t d_vis = kFeatureDim;
  std::size_t d_model = 256;
  std::size_t d_out = kTextDim;
  std::size_t n_heads = 4;
  std::size_t max_len = 6;
  std::size_t mlp_hidden = 1024;
  double ln_eps = 1e-5;

  std::size_t d_head() const { return d_model / n_heads; }
  /// Throws Errc::usage on a malformed config.
  void validate() const;
  std::size_t parameter_count() const;

  bool operator==(const PoolerConfig&) const = default;
};

/// Shape and storage of one named parameter tensor.
template <typename T>
struct TensorRef {
  std::string_view name;
  std::vector<std::size_t> dims;
  std::span<T> values;
};

/// All learnable tensors. Weight matrices are stored [in x out] so a layer is
/// y = x * W + b.
template <typename T>
struct PoolerParams {
  PoolerConfig config;

  Matrix<T> in_w;  // d_vis x d_model
  std::vector<T> in_b;
  Matrix<T> pos;  // max_len x d_model
  std::vector<T> query;
  std::vector<T> ln_in_g, ln_in_b;
  Matrix<T> q_w, k_w, v_w, o_w;  // d_model x d_model
  std::vector<T> q_b, k_b, v_b, o_b;
  std::vector<T> ln_attn_g, ln_attn_b;
  Matrix<T> mlp1_w;  // d_model x mlp_hidden
  std::vector<T> mlp1_b;
  Matrix<T> mlp2_w;  // mlp_hidden x d_model
  std::vector<T> mlp2_b;
  Matrix<T> out_w;  // d_model x d_out
  std::vector<T> out_b;

  /// All tensors zero-filled with the shapes implied by `config`.
  static PoolerParams zeros(const PoolerConfig& config);

  /// Tensors in canonical (checkpoint) order.
  std::vector<TensorRef<T>> tensors();
  std::vector<TensorRef<const T>> tensors() const;

  std::size_t parameter_count() const;

  bool operator==(const PoolerParams&) const = default;
};

/// Seeded init: weights truncated normal(0, 0.02) clipped at +-2 sigma,
/// biases 0, layer-norm scale 1 and shift 0, pos and query normal(0, 0.02).
PoolerParams<float> init_params(const PoolerConfig& config, std::uint64_t seed);

template <typename To, typename From>
PoolerParams<To> cast_params(const PoolerParams<From>& params);

/// Zero-padded batch of variable-length sequences.
template <typename T>
struct SequenceBatch {
  std::size_t max_len = 0;
  std::size_t d_vis = 0;
  std::vector<T> features;     // B x max_len x d_vis
  std::vector<std::uint8_t> mask;  // B x max_len, 1 = real frame
  std::vector<std::size_t> lengths;

  std::size_t size() const { return lengths.size(); }
  std::span<const T> frame(std::size_t b, std::size_t j) const {
    return {features.data() + (b * max_len + j) * d_vis, d_vis};
  }
  std::span<T> frame(std::size_t b, std::size_t j) {
    return {features.data() + (b * max_len + j) * d_vis, d_vis};
  }

  /// Empty batch of `batch` rows; fill with set_sequence.
  static SequenceBatch with_shape(std::size_t batch, std::size_t max_len, std::size_t d_vis);
  /// Copies `frames` (length x d_vis, row-major) into row b and sets mask and length.
  void set_sequence(std::size_t b, std::span<const T> frames, std::size_t length);
};

/// Builds a float batch from episodes. Throws Errc::usage for an episode
/// longer than max_len.
SequenceBatch<float> make_batch(std::span<const Episode* const> episodes, std::size_t max_len);
SequenceBatch<float> make_batch(std::span<const Episode> episodes, std::size_t max_len);

/// Intermediate values kept for the backward pass.
template <typename T>
struct ForwardCache {
  std::vector<std::size_t> offsets;  // first gathered row of each sequence, plus end
  Matrix<T> frames;                  // M x d_vis, valid frames only
  Matrix<T> ln_in_hat;               // normalized, before scale/shift
  std::vector<T> ln_in_rstd;
  Matrix<T> x;                       // ln_in output, M x d_model
  std::vector<T> qv;                 // projected query, d_model
  Matrix<T> k, v;                    // M x d_model
  Matrix<T> attn;                    // M x n_heads softmax weights
  Matrix<T> ctx;                     // B x d_model
  Matrix<T> o;                       // B x d_model
  Matrix<T> ln_attn_hat;
  std::vector<T> ln_attn_rstd;
  Matrix<T> y;                       // ln_attn output
  Matrix<T> u;                       // mlp pre-activation, B x mlp_hidden
  Matrix<T> g;                       // GELU(u)
  Matrix<T> z;                       // B x d_model
};

/// B x d_out unnormalized flow embeddings. Throws Errc::usage for a row with
/// length 0 or longer than max_len, or an inconsistent mask.
template <typename T>
Matrix<T> forward(const PoolerParams<T>& params, const SequenceBatch<T>& batch,
                  ForwardCache<T>* cache = nullptr);

/// B x n_heads x max_len attention weights (row-major), exactly 0 on padding.
template <typename T>
std::vector<T> attention_weights(const PoolerParams<T>& params, const SequenceBatch<T>& batch);

/// Gradients of a scalar loss w.r.t. every parameter, given dL/d(output).
template <typename T>
PoolerParams<T> backward(const PoolerParams<T>& params, const ForwardCache<T>& cache,
                         const Matrix<T>& d_out);

}  // namespace uflow
