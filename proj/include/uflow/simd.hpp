// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace uflow::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Table of float kernels for one instruction set. All matrices are
/// row-major with an explicit leading dimension.
struct Kernels {
  Isa isa;

  /// Returns sum_i a[i] * b[i].
  float (*dot)(const float* a, const float* b, std::size_t n);

  /// y[i] += alpha * x[i].
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);

  /// C[m x n] (+)= A[m x k] * B[k x n]. When `accumulate` is false C is
  /// overwritten.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k,
               const float* a, std::size_t lda,
               const float* b, std::size_t ldb,
               float* c, std::size_t ldc, bool accumulate);
};

const Kernels& scalar_kernels();

/// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const Kernels* avx2_kernels();

/// Kernels selected for this process. Resolution order: the UFLOW_SIMD
/// environment variable ("scalar" or "avx2"), then the best ISA the CPU
/// supports. Results of the float pipeline are bit-stable for a fixed ISA.
const Kernels& active();

/// Overrides the process-wide selection (tests and benchmarks). Returns false
/// if the requested ISA is unavailable.
bool force(Isa isa);

/// dst[n x m] = transpose(src[m x n]).
void transpose(const float* src, std::size_t m, std::size_t n, float* dst);

}  // namespace uflow::simd
