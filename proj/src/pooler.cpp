// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/pooler.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "uflow/error.hpp"
#include "uflow/rng.hpp"

namespace uflow {

void PoolerConfig::validate() const {
  if (d_vis == 0 || d_model == 0 || d_out == 0 || mlp_hidden == 0)
    fail(Errc::usage, "pooler config: dimensions must be positive");
  if (n_heads == 0 || d_model % n_heads != 0)
    fail(Errc::usage, "pooler config: d_model must be divisible by n_heads");
  if (max_len < 1) fail(Errc::usage, "pooler config: max_len must be >= 1");
  if (!(ln_eps > 0.0)) fail(Errc::usage, "pooler config: ln_eps must be positive");
}

std::size_t PoolerConfig::parameter_count() const {
  const std::size_t m = d_model;
  return d_vis * m + m            // input projection
         + max_len * m            // positional embeddings
         + m                      // query token
         + 2 * m                  // ln_in
         + 4 * (m * m + m)        // q, k, v, out projections
         + 2 * m                  // ln_attn
         + m * mlp_hidden + mlp_hidden + mlp_hidden * m + m  // mlp
         + m * d_out + d_out;     // output projection
}

template <typename T>
PoolerParams<T> PoolerParams<T>::zeros(const PoolerConfig& c) {
  c.validate();
  PoolerParams p;
  p.config = c;
  const std::size_t m = c.d_model;
  p.in_w.resize(c.d_vis, m);
  p.in_b.assign(m, T{0});
  p.pos.resize(c.max_len, m);
  p.query.assign(m, T{0});
  p.ln_in_g.assign(m, T{0});
  p.ln_in_b.assign(m, T{0});
  for (auto* w : {&p.q_w, &p.k_w, &p.v_w, &p.o_w}) w->resize(m, m);
  for (auto* b : {&p.q_b, &p.k_b, &p.v_b, &p.o_b}) b->assign(m, T{0});
  p.ln_attn_g.assign(m, T{0});
  p.ln_attn_b.assign(m, T{0});
  p.mlp1_w.resize(m, c.mlp_hidden);
  p.mlp1_b.assign(c.mlp_hidden, T{0});
  p.mlp2_w.resize(c.mlp_hidden, m);
  p.mlp2_b.assign(m, T{0});
  p.out_w.resize(m, c.d_out);
  p.out_b.assign(c.d_out, T{0});
  return p;
}

namespace {

template <typename T, typename P>
std::vector<TensorRef<T>> tensor_refs(P& p) {
  auto mat = [](std::string_view name, auto& m) {
    return TensorRef<T>{name, {m.rows, m.cols}, std::span<T>(m.data)};
  };
  auto vec = [](std::string_view name, auto& v) {
    return TensorRef<T>{name, {v.size()}, std::span<T>(v)};
  };
  return {mat("in_proj.weight", p.in_w),   vec("in_proj.bias", p.in_b),
          mat("pos_embed", p.pos),         vec("query", p.query),
          vec("ln_in.weight", p.ln_in_g),  vec("ln_in.bias", p.ln_in_b),
          mat("attn.q.weight", p.q_w),     vec("attn.q.bias", p.q_b),
          mat("attn.k.weight", p.k_w),     vec("attn.k.bias", p.k_b),
          mat("attn.v.weight", p.v_w),     vec("attn.v.bias", p.v_b),
          mat("attn.out.weight", p.o_w),   vec("attn.out.bias", p.o_b),
          vec("ln_attn.weight", p.ln_attn_g), vec("ln_attn.bias", p.ln_attn_b),
          mat("mlp.fc1.weight", p.mlp1_w), vec("mlp.fc1.bias", p.mlp1_b),
          mat("mlp.fc2.weight", p.mlp2_w), vec("mlp.fc2.bias", p.mlp2_b),
          mat("out_proj.weight", p.out_w), vec("out_proj.bias", p.out_b)};
}

}  // namespace

template <typename T>
std::vector<TensorRef<T>> PoolerParams<T>::tensors() {
  return tensor_refs<T>(*this);
}

template <typename T>
std::vector<TensorRef<const T>> PoolerParams<T>::tensors() const {
  return tensor_refs<const T>(*this);
}

template <typename T>
std::size_t PoolerParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.values.size();
  return n;
}

PoolerParams<float> init_params(const PoolerConfig& config, std::uint64_t seed) {
  auto p = PoolerParams<float>::zeros(config);
  constexpr double kStd = 0.02;
  std::uint64_t stream = 0;
  auto trunc = [&](Matrix<float>& m) {
    Rng rng(mix_seed(seed, stream++));
    for (float& v : m.data) v = static_cast<float>(rng.truncated_normal(kStd));
  };
  auto normal = [&](std::span<float> values) {
    Rng rng(mix_seed(seed, stream++));
    for (float& v : values) v = static_cast<float>(rng.normal() * kStd);
  };
  trunc(p.in_w);
  normal(p.pos.data);
  normal(p.query);
  trunc(p.q_w);
  trunc(p.k_w);
  trunc(p.v_w);
  trunc(p.o_w);
  trunc(p.mlp1_w);
  trunc(p.mlp2_w);
  trunc(p.out_w);
  std::fill(p.ln_in_g.begin(), p.ln_in_g.end(), 1.0f);
  std::fill(p.ln_attn_g.begin(), p.ln_attn_g.end(), 1.0f);
  return p;
}

template <typename To, typename From>
PoolerParams<To> cast_params(const PoolerParams<From>& params) {
  auto out = PoolerParams<To>::zeros(params.config);
  auto src = params.tensors();
  auto dst = out.tensors();
  for (std::size_t t = 0; t < src.size(); ++t)
    for (std::size_t i = 0; i < src[t].values.size(); ++i)
      dst[t].values[i] = static_cast<To>(src[t].values[i]);
  return out;
}

template PoolerParams<double> cast_params<double, float>(const PoolerParams<float>&);
template PoolerParams<float> cast_params<float, double>(const PoolerParams<double>&);
template PoolerParams<float> cast_params<float, float>(const PoolerParams<float>&);
template PoolerParams<double> cast_params<double, double>(const PoolerParams<double>&);

// ---------------------------------------------------------------------------
// Batches

template <typename T>
SequenceBatch<T> SequenceBatch<T>::with_shape(std::size_t batch, std::size_t max_len,
                                              std::size_t d_vis) {
  SequenceBatch b;
  b.max_len = max_len;
  b.d_vis = d_vis;
  b.features.assign(batch * max_len * d_vis, T{0});
  b.mask.assign(batch * max_len, 0);
  b.lengths.assign(batch, 0);
  return b;
}

template <typename T>
void SequenceBatch<T>::set_sequence(std::size_t b, std::span<const T> frames, std::size_t length) {
  if (length > max_len)
    fail(Errc::usage, "sequence of length " + std::to_string(length) + " exceeds max_len " +
                          std::to_string(max_len));
  if (frames.size() != length * d_vis) fail(Errc::usage, "sequence frame data has the wrong size");
  std::copy(frames.begin(), frames.end(), features.begin() + static_cast<std::ptrdiff_t>(b * max_len * d_vis));
  std::fill(features.begin() + static_cast<std::ptrdiff_t>((b * max_len + length) * d_vis),
            features.begin() + static_cast<std::ptrdiff_t>((b + 1) * max_len * d_vis), T{0});
  for (std::size_t j = 0; j < max_len; ++j) mask[b * max_len + j] = j < length ? 1 : 0;
  lengths[b] = length;
}

SequenceBatch<float> make_batch(std::span<const Episode* const> episodes, std::size_t max_len) {
  auto batch = SequenceBatch<float>::with_shape(episodes.size(), max_len, kFeatureDim);
  for (std::size_t b = 0; b < episodes.size(); ++b) {
    const Episode& ep = *episodes[b];
    if (ep.n_screens() > max_len)
      fail(Errc::usage, "episode '" + ep.id + "' has " + std::to_string(ep.n_screens()) +
                            " screens, pooler max_len is " + std::to_string(max_len));
    batch.set_sequence(b, ep.features, ep.n_screens());
  }
  return batch;
}

SequenceBatch<float> make_batch(std::span<const Episode> episodes, std::size_t max_len) {
  std::vector<const Episode*> ptrs;
  ptrs.reserve(episodes.size());
  for (const Episode& ep : episodes) ptrs.push_back(&ep);
  return make_batch(std::span<const Episode* const>(ptrs), max_len);
}

// ---------------------------------------------------------------------------
// Forward

namespace {

template <typename T>
void check_batch(const PoolerConfig& c, const SequenceBatch<T>& batch) {
  if (batch.d_vis != c.d_vis)
    fail(Errc::usage, "batch feature dim " + std::to_string(batch.d_vis) + " does not match pooler d_vis " +
                          std::to_string(c.d_vis));
  if (batch.max_len > c.max_len)
    fail(Errc::usage, "batch max_len " + std::to_string(batch.max_len) + " exceeds pooler max_len " +
                          std::to_string(c.max_len));
  const std::size_t n = batch.size();
  if (batch.features.size() != n * batch.max_len * batch.d_vis || batch.mask.size() != n * batch.max_len)
    fail(Errc::usage, "batch buffers have inconsistent sizes");
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t len = batch.lengths[b];
    if (len == 0) fail(Errc::usage, "batch row " + std::to_string(b) + " has length 0; nothing to pool");
    if (len > batch.max_len) fail(Errc::usage, "batch row " + std::to_string(b) + " longer than max_len");
    for (std::size_t j = 0; j < batch.max_len; ++j)
      if ((batch.mask[b * batch.max_len + j] != 0) != (j < len))
        fail(Errc::usage, "batch row " + std::to_string(b) + " mask disagrees with its length");
  }
}

template <typename T>
void layer_norm(const Matrix<T>& in, std::span<const T> gamma, std::span<const T> beta, double eps,
                Matrix<T>& hat, std::vector<T>& rstd, Matrix<T>& out) {
  const std::size_t n = in.cols;
  hat.resize(in.rows, n);
  out.resize(in.rows, n);
  rstd.assign(in.rows, T{0});
  for (std::size_t i = 0; i < in.rows; ++i) {
    auto r = in.row(i);
    double mean = 0.0;
    for (T v : r) mean += static_cast<double>(v);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (T v : r) {
      const double d = static_cast<double>(v) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const T rs = static_cast<T>(1.0 / std::sqrt(var + eps));
    const T m = static_cast<T>(mean);
    rstd[i] = rs;
    auto h = hat.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      h[j] = (r[j] - m) * rs;
      o[j] = h[j] * gamma[j] + beta[j];
    }
  }
}

// d_in from d_out; accumulates d_gamma, d_beta.
template <typename T>
void layer_norm_backward(const Matrix<T>& d_out, const Matrix<T>& hat, const std::vector<T>& rstd,
                         std::span<const T> gamma, std::span<T> d_gamma, std::span<T> d_beta,
                         Matrix<T>& d_in) {
  const std::size_t n = d_out.cols;
  d_in.resize(d_out.rows, n);
  std::vector<T> dhat(n);
  for (std::size_t i = 0; i < d_out.rows; ++i) {
    auto dy = d_out.row(i);
    auto h = hat.row(i);
    double sum_dhat = 0.0, sum_dhat_h = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      d_gamma[j] += dy[j] * h[j];
      d_beta[j] += dy[j];
      dhat[j] = dy[j] * gamma[j];
      sum_dhat += static_cast<double>(dhat[j]);
      sum_dhat_h += static_cast<double>(dhat[j]) * static_cast<double>(h[j]);
    }
    const T mean_dhat = static_cast<T>(sum_dhat / static_cast<double>(n));
    const T mean_dhat_h = static_cast<T>(sum_dhat_h / static_cast<double>(n));
    auto dx = d_in.row(i);
    for (std::size_t j = 0; j < n; ++j) dx[j] = rstd[i] * (dhat[j] - mean_dhat - h[j] * mean_dhat_h);
  }
}

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2.0)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2.0)));
  const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

// y = x * W + b
template <typename T>
void linear(const Matrix<T>& x, const Matrix<T>& w, std::span<const T> b, Matrix<T>& y) {
  y.resize(x.rows, w.cols);
  linalg::matmul(x, w, y);
  linalg::add_row_bias(y, b);
}

template <typename T>
void linear_backward(const Matrix<T>& x, const Matrix<T>& w, const Matrix<T>& dy, Matrix<T>& dw,
                     std::span<T> db, Matrix<T>* dx) {
  linalg::matmul_tn(x, dy, dw, true);
  linalg::column_sums(dy, db, true);
  if (dx) {
    dx->resize(dy.rows, w.rows);
    linalg::matmul_nt(dy, w, *dx);
  }
}

// Softmax over the valid frames of each sequence, per head; fills cache.attn
// and cache.ctx.
template <typename T>
void attend(const PoolerConfig& c, ForwardCache<T>& cc, std::size_t batch) {
  const std::size_t dh = c.d_head();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  cc.attn.resize(cc.k.rows, c.n_heads);
  cc.ctx.resize(batch, c.d_model);
  std::vector<T> scores;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t r0 = cc.offsets[b], r1 = cc.offsets[b + 1];
    scores.resize(r1 - r0);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      std::span<const T> qh(cc.qv.data() + h * dh, dh);
      T max_score = -std::numeric_limits<T>::infinity();
      for (std::size_t r = r0; r < r1; ++r) {
        scores[r - r0] = linalg::dot<T>(qh, cc.k.row(r).subspan(h * dh, dh)) * scale;
        max_score = std::max(max_score, scores[r - r0]);
      }
      T denom{0};
      for (T& s : scores) {
        s = std::exp(s - max_score);
        denom += s;
      }
      auto ctx = cc.ctx.row(b).subspan(h * dh, dh);
      for (std::size_t r = r0; r < r1; ++r) {
        const T w = scores[r - r0] / denom;
        cc.attn(r, h) = w;
        auto vh = cc.v.row(r).subspan(h * dh, dh);
        for (std::size_t d = 0; d < dh; ++d) ctx[d] += w * vh[d];
      }
    }
  }
}

// Everything up to and including the attention context.
template <typename T>
void forward_attention(const PoolerParams<T>& p, const SequenceBatch<T>& batch, ForwardCache<T>& cc) {
  const PoolerConfig& c = p.config;
  check_batch(c, batch);
  const std::size_t n = batch.size();

  cc.offsets.assign(n + 1, 0);
  for (std::size_t b = 0; b < n; ++b) cc.offsets[b + 1] = cc.offsets[b] + batch.lengths[b];
  const std::size_t rows = cc.offsets[n];

  cc.frames.resize(rows, c.d_vis);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < batch.lengths[b]; ++j) {
      auto src = batch.frame(b, j);
      std::copy(src.begin(), src.end(), cc.frames.row(cc.offsets[b] + j).begin());
    }

  Matrix<T> h;
  linear(cc.frames, p.in_w, std::span<const T>(p.in_b), h);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t j = 0; j < batch.lengths[b]; ++j) {
      auto row = h.row(cc.offsets[b] + j);
      auto pos = p.pos.row(j);
      for (std::size_t d = 0; d < c.d_model; ++d) row[d] += pos[d];
    }
  layer_norm(h, std::span<const T>(p.ln_in_g), std::span<const T>(p.ln_in_b), c.ln_eps, cc.ln_in_hat,
             cc.ln_in_rstd, cc.x);

  cc.qv.assign(p.q_b.begin(), p.q_b.end());
  for (std::size_t i = 0; i < c.d_model; ++i) {
    const T qi = p.query[i];
    auto wrow = p.q_w.row(i);
    for (std::size_t j = 0; j < c.d_model; ++j) cc.qv[j] += qi * wrow[j];
  }
  linear(cc.x, p.k_w, std::span<const T>(p.k_b), cc.k);
  linear(cc.x, p.v_w, std::span<const T>(p.v_b), cc.v);
  attend(c, cc, n);
}

}  // namespace

template <typename T>
Matrix<T> forward(const PoolerParams<T>& p, const SequenceBatch<T>& batch, ForwardCache<T>* cache) {
  ForwardCache<T> local;
  ForwardCache<T>& cc = cache ? *cache : local;
  forward_attention(p, batch, cc);

  linear(cc.ctx, p.o_w, std::span<const T>(p.o_b), cc.o);
  layer_norm(cc.o, std::span<const T>(p.ln_attn_g), std::span<const T>(p.ln_attn_b), p.config.ln_eps,
             cc.ln_attn_hat, cc.ln_attn_rstd, cc.y);
  linear(cc.y, p.mlp1_w, std::span<const T>(p.mlp1_b), cc.u);
  cc.g.resize(cc.u.rows, cc.u.cols);
  for (std::size_t i = 0; i < cc.u.size(); ++i) cc.g.data[i] = gelu(cc.u.data[i]);
  linear(cc.g, p.mlp2_w, std::span<const T>(p.mlp2_b), cc.z);
  Matrix<T> out;
  linear(cc.z, p.out_w, std::span<const T>(p.out_b), out);
  return out;
}

template <typename T>
std::vector<T> attention_weights(const PoolerParams<T>& p, const SequenceBatch<T>& batch) {
  ForwardCache<T> cc;
  forward_attention(p, batch, cc);
  const std::size_t heads = p.config.n_heads, len = batch.max_len;
  std::vector<T> out(batch.size() * heads * len, T{0});
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t j = 0; j < batch.lengths[b]; ++j)
        out[(b * heads + h) * len + j] = cc.attn(cc.offsets[b] + j, h);
  return out;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
PoolerParams<T> backward(const PoolerParams<T>& p, const ForwardCache<T>& cc, const Matrix<T>& d_out) {
  const PoolerConfig& c = p.config;
  auto grads = PoolerParams<T>::zeros(c);
  const std::size_t n = cc.ctx.rows;
  if (d_out.rows != n || d_out.cols != c.d_out) fail(Errc::usage, "backward: d_out has the wrong shape");

  Matrix<T> dz, dg, dy, d_o, dctx;
  linear_backward(cc.z, p.out_w, d_out, grads.out_w, std::span<T>(grads.out_b), &dz);
  linear_backward(cc.g, p.mlp2_w, dz, grads.mlp2_w, std::span<T>(grads.mlp2_b), &dg);
  Matrix<T>& du = dg;
  for (std::size_t i = 0; i < du.size(); ++i) du.data[i] *= gelu_grad(cc.u.data[i]);
  linear_backward(cc.y, p.mlp1_w, du, grads.mlp1_w, std::span<T>(grads.mlp1_b), &dy);
  layer_norm_backward(dy, cc.ln_attn_hat, cc.ln_attn_rstd, std::span<const T>(p.ln_attn_g),
                      std::span<T>(grads.ln_attn_g), std::span<T>(grads.ln_attn_b), d_o);
  linear_backward(cc.ctx, p.o_w, d_o, grads.o_w, std::span<T>(grads.o_b), &dctx);

  // Attention: ctx_h = sum_j a_j v_jh, a = softmax(s), s_j = qv_h . k_jh * scale.
  const std::size_t dh = c.d_head();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  Matrix<T> dk(cc.k.rows, c.d_model), dv(cc.v.rows, c.d_model);
  std::vector<T> dqv(c.d_model, T{0});
  std::vector<T> da;
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t r0 = cc.offsets[b], r1 = cc.offsets[b + 1];
    da.resize(r1 - r0);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      auto dctx_h = std::span<const T>(dctx.row(b)).subspan(h * dh, dh);
      T weighted{0};
      for (std::size_t r = r0; r < r1; ++r) {
        const T a = cc.attn(r, h);
        auto dv_h = dv.row(r).subspan(h * dh, dh);
        for (std::size_t d = 0; d < dh; ++d) dv_h[d] = a * dctx_h[d];
        da[r - r0] = linalg::dot<T>(dctx_h, cc.v.row(r).subspan(h * dh, dh));
        weighted += a * da[r - r0];
      }
      auto qh = std::span<const T>(cc.qv).subspan(h * dh, dh);
      for (std::size_t r = r0; r < r1; ++r) {
        const T ds = cc.attn(r, h) * (da[r - r0] - weighted) * scale;
        auto k_h = cc.k.row(r).subspan(h * dh, dh);
        auto dk_h = dk.row(r).subspan(h * dh, dh);
        for (std::size_t d = 0; d < dh; ++d) {
          dqv[h * dh + d] += ds * k_h[d];
          dk_h[d] = ds * qh[d];
        }
      }
    }
  }

  Matrix<T> dx, dx_v;
  linear_backward(cc.x, p.k_w, dk, grads.k_w, std::span<T>(grads.k_b), &dx);
  linear_backward(cc.x, p.v_w, dv, grads.v_w, std::span<T>(grads.v_b), &dx_v);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dx_v.data[i];

  // qv = query * W_q + b_q
  for (std::size_t i = 0; i < c.d_model; ++i) {
    auto gw = grads.q_w.row(i);
    auto w = p.q_w.row(i);
    T dq{0};
    for (std::size_t j = 0; j < c.d_model; ++j) {
      gw[j] += p.query[i] * dqv[j];
      dq += w[j] * dqv[j];
    }
    grads.query[i] += dq;
    grads.q_b[i] += dqv[i];
  }

  Matrix<T> dh_in;
  layer_norm_backward(dx, cc.ln_in_hat, cc.ln_in_rstd, std::span<const T>(p.ln_in_g),
                      std::span<T>(grads.ln_in_g), std::span<T>(grads.ln_in_b), dh_in);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t r = cc.offsets[b]; r < cc.offsets[b + 1]; ++r) {
      auto gp = grads.pos.row(r - cc.offsets[b]);
      auto src = dh_in.row(r);
      for (std::size_t d = 0; d < c.d_model; ++d) gp[d] += src[d];
    }
  linear_backward(cc.frames, p.in_w, dh_in, grads.in_w, std::span<T>(grads.in_b), static_cast<Matrix<T>*>(nullptr));
  return grads;
}

template struct PoolerParams<float>;
template struct PoolerParams<double>;
template struct SequenceBatch<float>;
template struct SequenceBatch<double>;
template Matrix<float> forward(const PoolerParams<float>&, const SequenceBatch<float>&, ForwardCache<float>*);
template Matrix<double> forward(const PoolerParams<double>&, const SequenceBatch<double>&, ForwardCache<double>*);
template std::vector<float> attention_weights(const PoolerParams<float>&, const SequenceBatch<float>&);
template std::vector<double> attention_weights(const PoolerParams<double>&, const SequenceBatch<double>&);
template PoolerParams<float> backward(const PoolerParams<float>&, const ForwardCache<float>&, const Matrix<float>&);
template PoolerParams<double> backward(const PoolerParams<double>&, const ForwardCache<double>&, const Matrix<double>&);

}  // namespace uflow
