// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "uflow/error.hpp"
#include "uflow/rng.hpp"
#include "uflow/training.hpp"

namespace uflow {

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(Errc::usage, "train: lr must be finite and >= 0");
  if (batch_size < 2) fail(Errc::usage, "train: batch_size must be >= 2");
  if (epochs < 1) fail(Errc::usage, "train: epochs must be >= 1");
  if (!(temperature > 0.0)) fail(Errc::usage, "train: temperature must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(Errc::usage, "train: train_fraction must be in (0, 1)");
  if (min_len < 1 || max_len < min_len) fail(Errc::usage, "train: need 1 <= min_len <= max_len");
}

std::string to_json_line(const EpochRecord& rec) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "{\"epoch\":%zu,\"train_loss\":%.9g,\"val_loss\":%.9g,\"seconds\":%.3f}",
                rec.epoch, rec.train_loss, rec.val_loss, rec.seconds);
  return buf;
}

std::pair<std::vector<Episode>, std::vector<Episode>> train_val_split(const Dataset& dataset,
                                                                      const TrainConfig& config) {
  const auto kept = filter_episodes(dataset.episodes, config.min_len, config.max_len);
  return split(kept, config.train_fraction, dataset.split_seed);
}

namespace {

Matrix<float> text_matrix(std::span<const Episode* const> batch) {
  Matrix<float> t(batch.size(), kTextDim);
  for (std::size_t i = 0; i < batch.size(); ++i)
    std::copy(batch[i]->text_embedding.begin(), batch[i]->text_embedding.end(), t.row(i).begin());
  return t;
}

std::vector<std::vector<const Episode*>> partition(const std::vector<const Episode*>& order,
                                                   std::size_t batch_size, bool keep_lone_batch) {
  std::vector<std::vector<const Episode*>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    if (end - i < 2 && !(keep_lone_batch && batches.empty())) continue;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace

Matrix<float> embed_episodes(const PoolerParams<float>& params, std::span<const Episode> episodes,
                             std::size_t chunk) {
  Matrix<float> out(episodes.size(), params.config.d_out);
  for (std::size_t i = 0; i < episodes.size(); i += chunk) {
    const std::size_t n = std::min(chunk, episodes.size() - i);
    const auto batch = make_batch(episodes.subspan(i, n), params.config.max_len);
    const Matrix<float> pooled = forward(params, batch);
    std::copy(pooled.data.begin(), pooled.data.end(), out.row(i).begin());
  }
  return out;
}

double dataset_loss(const PoolerParams<float>& params, std::span<const Episode> episodes,
                    std::size_t batch_size, double tau) {
  std::vector<const Episode*> order;
  for (const Episode& ep : episodes) order.push_back(&ep);
  const auto batches = partition(order, batch_size, true);
  if (batches.empty()) fail(Errc::usage, "loss over an empty episode set");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    const Matrix<float> v = forward(params, make_batch(std::span<const Episode* const>(b), params.config.max_len));
    total += contrastive_loss(v, text_matrix(b), tau) * static_cast<double>(b.size());
    count += b.size();
  }
  return total / static_cast<double>(count);
}

double train_step(PoolerParams<float>& params, AdamState& state, std::span<const Episode* const> batch,
                  const TrainConfig& config) {
  ForwardCache<float> cache;
  const Matrix<float> v = forward(params, make_batch(batch, params.config.max_len), &cache);
  const LossAndGrad<float> lg = contrastive_loss_grad(v, text_matrix(batch), config.temperature);
  if (!std::isfinite(lg.loss)) fail(Errc::numeric, "training loss is not finite");
  const PoolerParams<float> grads = backward(params, cache, lg.grad_v);
  adam_step(params, grads, state, config.adam());
  return lg.loss;
}

TrainResult train(const Dataset& dataset, const PoolerConfig& pooler, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  pooler.validate();
  if (config.max_len > pooler.max_len)
    fail(Errc::usage, "train: max_len exceeds the pooler's max_len");
  if (pooler.d_vis != kFeatureDim || pooler.d_out != kTextDim)
    fail(Errc::usage, "train: pooler dims must be " + std::to_string(kFeatureDim) + " -> " +
                          std::to_string(kTextDim));

  const auto [train_set, val_set] = train_val_split(dataset, config);
  if (train_set.size() < 2) fail(Errc::usage, "train: fewer than 2 training episodes after filtering");
  if (val_set.empty()) fail(Errc::usage, "train: empty validation split");

  TrainResult result;
  result.final_checkpoint.train = config;
  result.final_checkpoint.params = init_params(pooler, config.seed);
  PoolerParams<float>& params = result.final_checkpoint.params;
  AdamState state = AdamState::zeros(pooler);

  result.report.initial_val_loss = dataset_loss(params, val_set, config.batch_size, config.temperature);
  double best_val = INFINITY;

  std::vector<const Episode*> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    // Each epoch permutes the canonical order, so epoch e depends only on (seed, e).
    for (std::size_t i = 0; i < train_set.size(); ++i) order[i] = &train_set[i];
    Rng rng(mix_seed(config.seed, 1000 + epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double total = 0.0;
    std::size_t count = 0;
    for (const auto& batch : partition(order, config.batch_size, false)) {
      total += train_step(params, state, batch, config) * static_cast<double>(batch.size());
      count += batch.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(count);
    rec.val_loss = dataset_loss(params, val_set, config.batch_size, config.temperature);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(rec);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.best_checkpoint = result.final_checkpoint;
    }
    if (options.on_epoch) options.on_epoch(rec);
  }

  if (options.checkpoint_path) {
    std::filesystem::path best = *options.checkpoint_path;
    best += ".best";
    write_checkpoint(result.final_checkpoint, *options.checkpoint_path);
    write_checkpoint(result.best_checkpoint, best);
    result.report.checkpoint_path = *options.checkpoint_path;
    result.report.best_checkpoint_path = best;
  }
  return result;
}

}  // namespace uflow
