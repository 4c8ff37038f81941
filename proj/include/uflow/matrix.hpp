// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "uflow/simd.hpp"

namespace uflow {

/// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{0}) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, T{0});
  }

  bool operator==(const Matrix&) const = default;
};

namespace linalg {

/// c (+)= a * b
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, bool accumulate = false) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  if constexpr (std::is_same_v<T, float>) {
    simd::active().gemm(a.rows, b.cols, a.cols, a.data.data(), a.cols, b.data.data(), b.cols,
                        c.data.data(), c.cols, accumulate);
  } else {
    if (!accumulate) c.fill(T{0});
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t p = 0; p < a.cols; ++p) {
        const T aip = a(i, p);
        for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aip * b(p, j);
      }
  }
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols, a.rows);
  if constexpr (std::is_same_v<T, float>) {
    simd::transpose(a.data.data(), a.rows, a.cols, t.data.data());
  } else {
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  }
  return t;
}

/// c (+)= transpose(a) * b
template <typename T>
void matmul_tn(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, bool accumulate = false) {
  matmul(transpose(a), b, c, accumulate);
}

/// c (+)= a * transpose(b)
template <typename T>
void matmul_nt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, bool accumulate = false) {
  matmul(a, transpose(b), c, accumulate);
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  assert(a.size() == b.size());
  if constexpr (std::is_same_v<T, float>) {
    return simd::active().dot(a.data(), b.data(), a.size());
  } else {
    T acc{0};
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
}

/// Adds `bias` to every row of m.
template <typename T>
void add_row_bias(Matrix<T>& m, std::span<const T> bias) {
  assert(bias.size() == m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    T* r = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) r[j] += bias[j];
  }
}

/// out[j] (+)= sum_i m(i, j)
template <typename T>
void column_sums(const Matrix<T>& m, std::span<T> out, bool accumulate = false) {
  assert(out.size() == m.cols);
  if (!accumulate) std::fill(out.begin(), out.end(), T{0});
  for (std::size_t i = 0; i < m.rows; ++i) {
    const T* r = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) out[j] += r[j];
  }
}

}  // namespace linalg
}  // namespace uflow
