// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/loss.hpp"

#include <cmath>
#include <vector>

#include "uflow/error.hpp"

namespace uflow {
namespace {

template <typename T>
void check_inputs(const Matrix<T>& v, const Matrix<T>& t, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(Errc::numeric, "temperature must be positive and finite");
  if (v.rows == 0) fail(Errc::usage, "contrastive loss needs at least one pair");
  if (v.rows != t.rows || v.cols != t.cols)
    fail(Errc::usage, "contrastive loss: V and T shapes differ");
}

struct Softmaxes {
  double loss = 0.0;
  std::vector<double> row_p;  // softmax over each row of S
  std::vector<double> col_p;  // softmax over each column of S
};

// S is n x n logits (already divided by tau).
Softmaxes symmetric_ce(const std::vector<double>& s, std::size_t n) {
  Softmaxes out;
  out.row_p.assign(n * n, 0.0);
  out.col_p.assign(n * n, 0.0);
  double row_ce = 0.0, col_ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, s[i * n + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(s[i * n + j] - mx);
    const double lse = mx + std::log(sum);
    row_ce += lse - s[i * n + i];
    for (std::size_t j = 0; j < n; ++j) out.row_p[i * n + j] = std::exp(s[i * n + j] - lse);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, s[i * n + j]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(s[i * n + j] - mx);
    const double lse = mx + std::log(sum);
    col_ce += lse - s[j * n + j];
    for (std::size_t i = 0; i < n; ++i) out.col_p[i * n + j] = std::exp(s[i * n + j] - lse);
  }
  out.loss = 0.5 * (row_ce + col_ce) / static_cast<double>(n);
  return out;
}

template <typename T>
std::vector<double> logits(const Matrix<T>& vn, const Matrix<T>& tn, double tau) {
  Matrix<T> s(vn.rows, tn.rows);
  linalg::matmul_nt(vn, tn, s);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<double>(s.data[i]) / tau;
  return out;
}

}  // namespace

template <typename T>
Matrix<T> normalize_rows(const Matrix<T>& m) {
  Matrix<T> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double norm2 = 0.0;
    for (T x : m.row(i)) norm2 += static_cast<double>(x) * static_cast<double>(x);
    if (!std::isfinite(norm2)) fail(Errc::numeric, "row " + std::to_string(i) + " is not finite");
    if (norm2 == 0.0) fail(Errc::numeric, "row " + std::to_string(i) + " has zero norm");
    const double inv = 1.0 / std::sqrt(norm2);
    auto src = m.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) dst[j] = static_cast<T>(static_cast<double>(src[j]) * inv);
  }
  return out;
}

template <typename T>
double contrastive_loss(const Matrix<T>& v, const Matrix<T>& t, double tau) {
  check_inputs(v, t, tau);
  const Matrix<T> vn = normalize_rows(v);
  const Matrix<T> tn = normalize_rows(t);
  return symmetric_ce(logits(vn, tn, tau), v.rows).loss;
}

template <typename T>
LossAndGrad<T> contrastive_loss_grad(const Matrix<T>& v, const Matrix<T>& t, double tau) {
  check_inputs(v, t, tau);
  const std::size_t n = v.rows;
  const Matrix<T> vn = normalize_rows(v);
  const Matrix<T> tn = normalize_rows(t);
  const Softmaxes sm = symmetric_ce(logits(vn, tn, tau), n);

  // dL/dS_ij = ((P_ij - d_ij) + (Q_ij - d_ij)) / 2n, S = Vn Tn^T / tau.
  Matrix<T> ds(n, n);
  const double c = 0.5 / static_cast<double>(n) / tau;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 2.0 : 0.0;
      ds(i, j) = static_cast<T>(c * (sm.row_p[i * n + j] + sm.col_p[i * n + j] - delta));
    }

  Matrix<T> dvn(n, v.cols);
  linalg::matmul(ds, tn, dvn);

  // Through y = x / |x|: dx = (dy - y (y . dy)) / |x|.
  LossAndGrad<T> out;
  out.loss = sm.loss;
  out.grad_v.resize(n, v.cols);
  for (std::size_t i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (T x : v.row(i)) norm2 += static_cast<double>(x) * static_cast<double>(x);
    const double inv = 1.0 / std::sqrt(norm2);
    auto y = vn.row(i);
    auto dy = dvn.row(i);
    double proj = 0.0;
    for (std::size_t j = 0; j < v.cols; ++j) proj += static_cast<double>(y[j]) * static_cast<double>(dy[j]);
    auto dx = out.grad_v.row(i);
    for (std::size_t j = 0; j < v.cols; ++j)
      dx[j] = static_cast<T>((static_cast<double>(dy[j]) - static_cast<double>(y[j]) * proj) * inv);
  }
  return out;
}

template double contrastive_loss(const Matrix<float>&, const Matrix<float>&, double);
template double contrastive_loss(const Matrix<double>&, const Matrix<double>&, double);
template LossAndGrad<float> contrastive_loss_grad(const Matrix<float>&, const Matrix<float>&, double);
template LossAndGrad<double> contrastive_loss_grad(const Matrix<double>&, const Matrix<double>&, double);
template Matrix<float> normalize_rows(const Matrix<float>&);
template Matrix<double> normalize_rows(const Matrix<double>&);

}  // namespace uflow
