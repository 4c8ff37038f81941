// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// Reference kernels. Every ISA variant is tested for equivalence against
// these, so they stay deliberately plain.

#include "uflow/simd.hpp"

namespace uflow::simd {
namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k,
                 const float* a, std::size_t lda,
                 const float* b, std::size_t ldb,
                 float* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = a[i * lda + p];
      const float* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels table{Isa::scalar, &dot_scalar, &axpy_scalar, &gemm_scalar};
  return table;
}

void transpose(const float* src, std::size_t m, std::size_t n, float* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t ib = 0; ib < m; ib += kBlock)
    for (std::size_t jb = 0; jb < n; jb += kBlock) {
      const std::size_t ie = ib + kBlock < m ? ib + kBlock : m;
      const std::size_t je = jb + kBlock < n ? jb + kBlock : n;
      for (std::size_t i = ib; i < ie; ++i)
        for (std::size_t j = jb; j < je; ++j) dst[j * m + i] = src[i * n + j];
    }
}

}  // namespace uflow::simd
