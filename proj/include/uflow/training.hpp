// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "uflow/adam.hpp"
#include "uflow/dataset.hpp"
#include "uflow/loss.hpp"
#include "uflow/pooler.hpp"

namespace uflow {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t epochs = 100;
  double temperature = 0.07;
  double train_fraction = 0.9;
  std::uint64_t seed = 123;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Episodes outside [min_len, max_len] screens are filtered out before the
  /// split; max_len must not exceed the pooler's.
  std::size_t min_len = 3;
  std::size_t max_len = 6;

  void validate() const;
  AdamConfig adam() const { return {lr, beta1, beta2, adam_eps}; }

  bool operator==(const TrainConfig&) const = default;
};

/// Trained parameters plus the configuration that produced them.
struct Checkpoint {
  TrainConfig train;
  PoolerParams<float> params;

  bool operator==(const Checkpoint&) const = default;
};

/// Checkpoint file:
///   "UFPC" | u32 version=1 | u32 json_len | config JSON |
///   u32 count | per tensor: u16 name_len, name, u32 rank, u32 dims..., f32 data
/// Tensors appear in PoolerParams::tensors() order.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the encoded checkpoint.
std::string checkpoint_id(const Checkpoint& ckpt);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<std::filesystem::path> best_checkpoint_path;
  double initial_val_loss = 0.0;
};

/// JSON line {epoch, train_loss, val_loss, seconds}.
std::string to_json_line(const EpochRecord& rec);

struct TrainOptions {
  /// When set, the final checkpoint is written here and the best-validation
  /// checkpoint next to it with a ".best" suffix.
  std::optional<std::filesystem::path> checkpoint_path;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  Checkpoint final_checkpoint;
  Checkpoint best_checkpoint;
};

/// Train and validation episodes exactly as train() and evaluate() derive
/// them: length filter, then split with the dataset's split seed.
std::pair<std::vector<Episode>, std::vector<Episode>> train_val_split(const Dataset& dataset,
                                                                      const TrainConfig& config);

/// Pooled, L2-normalizable embeddings for `episodes`, computed in chunks.
Matrix<float> embed_episodes(const PoolerParams<float>& params, std::span<const Episode> episodes,
                             std::size_t chunk = 256);

/// Episode-weighted mean loss over consecutive batches of `batch_size`
/// (a trailing batch of one episode is dropped unless it is the only one).
double dataset_loss(const PoolerParams<float>& params, std::span<const Episode> episodes,
                    std::size_t batch_size, double tau);

/// One optimization step on a batch; returns the batch loss.
double train_step(PoolerParams<float>& params, AdamState& state, std::span<const Episode* const> batch,
                  const TrainConfig& config);

TrainResult train(const Dataset& dataset, const PoolerConfig& pooler, const TrainConfig& config,
                  const TrainOptions& options = {});

}  // namespace uflow
