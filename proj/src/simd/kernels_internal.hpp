// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "uflow/simd.hpp"

namespace uflow::simd::detail {

#if defined(UFLOW_HAVE_AVX2)
const Kernels& avx2_table();
#endif

}  // namespace uflow::simd::detail
