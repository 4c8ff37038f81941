// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "uflow/matrix.hpp"

namespace uflow {

/// Symmetric cross-entropy over cosine-similarity logits:
///   L = 1/2 [ CE(V T^T / tau) + CE(T V^T / tau) ]
/// with CE(M) = mean_i -log softmax(M_i)[i]. Rows of V and T are
/// L2-normalized first, so raw (unnormalized) rows are accepted. Logits and
/// softmax are evaluated in double.
///
/// Throws Errc::numeric for tau <= 0, a non-finite entry, or a zero row, and
/// Errc::usage for mismatched shapes or an empty batch.
template <typename T>
double contrastive_loss(const Matrix<T>& v, const Matrix<T>& t, double tau);

template <typename T>
struct LossAndGrad {
  double loss = 0.0;
  /// dL/dV w.r.t. the raw (pre-normalization) rows of V. T is treated as
  /// constant.
  Matrix<T> grad_v;
};

template <typename T>
LossAndGrad<T> contrastive_loss_grad(const Matrix<T>& v, const Matrix<T>& t, double tau);

/// Row-wise L2 normalization; throws Errc::numeric on a zero or non-finite row.
template <typename T>
Matrix<T> normalize_rows(const Matrix<T>& m);

}  // namespace uflow
