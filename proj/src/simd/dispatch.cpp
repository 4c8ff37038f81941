// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"
#include "uflow/simd.hpp"

namespace uflow::simd {
namespace {

bool cpu_has_avx2() {
#if defined(UFLOW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* resolve() {
  const Kernels* best = avx2_kernels();
  if (const char* env = std::getenv("UFLOW_SIMD")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && best) return best;
  }
  return best ? best : &scalar_kernels();
}

std::atomic<const Kernels*>& slot() {
  static std::atomic<const Kernels*> current{resolve()};
  return current;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

const Kernels* avx2_kernels() {
#if defined(UFLOW_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &detail::avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const Kernels& active() { return *slot().load(std::memory_order_acquire); }

bool force(Isa isa) {
  const Kernels* k = isa == Isa::scalar ? &scalar_kernels() : avx2_kernels();
  if (!k) return false;
  slot().store(k, std::memory_order_release);
  return true;
}

}  // namespace uflow::simd
