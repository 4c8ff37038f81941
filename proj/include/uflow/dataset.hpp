// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace uflow {

/// Per-screen encoder feature width.
inline constexpr std::size_t kFeatureDim = 1024;
/// Text embedding width.
inline constexpr std::size_t kTextDim = 1536;

/// One recorded user flow: ordered per-screen features plus its task text.
struct Episode {
  std::string id;
  std::string description;
  /// n_screens x kFeatureDim, row-major.
  std::vector<float> features;
  std::vector<float> text_embedding;
  std::optional<std::string> archetype_label;
  std::vector<std::string> thumbnail_refs;

  std::size_t n_screens() const { return features.size() / kFeatureDim; }
  std::span<const float> screen(std::size_t i) const {
    return {features.data() + i * kFeatureDim, kFeatureDim};
  }

  bool operator==(const Episode&) const = default;
};

struct Dataset {
  std::vector<Episode> episodes;
  std::uint64_t split_seed = 0;
  std::map<std::string, std::string> meta;

  bool operator==(const Dataset&) const = default;
};

/// Throws Errc::format when an episode violates the data model (dims,
/// non-finite values, empty screen list, duplicate ids).
void validate(const Dataset& dataset);

/// Episodes with min_len <= n_screens <= max_len, order preserved.
std::vector<Episode> filter_episodes(std::span<const Episode> episodes, std::size_t min_len,
                                     std::size_t max_len);

/// Seeded Fisher-Yates shuffle of indices, then the first
/// round(train_fraction * N) go to train. Requires N >= 2 and
/// 0 < train_fraction < 1; both sides end up non-empty.
std::pair<std::vector<Episode>, std::vector<Episode>> split(std::span<const Episode> episodes,
                                                            double train_fraction,
                                                            std::uint64_t seed);

/// Dataset directory layout: manifest.json, features.bin, texts.bin.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Deterministic hashed bag-of-words embedding of width kTextDim.
///
/// The text is split into tokens at every ASCII byte that is not a letter or
/// digit (bytes >= 0x80 stay inside tokens); ASCII letters are lowercased.
/// Each token is hashed with 64-bit FNV-1a; bucket = hash % 1536 and the sign
/// is -1 when bit 63 is set, +1 otherwise. Bucket values are accumulated in
/// double and the result is L2-normalized and rounded to float. With no
/// tokens the result is the constant vector 1/sqrt(1536).
std::vector<float> toy_text_embed(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);

struct SynthConfig {
  std::size_t n_archetypes = 16;
  std::size_t n_episodes = 2000;
  double noise_sigma = 0.1;
  std::uint64_t seed = 42;
  std::size_t min_len = 3;
  std::size_t max_len = 6;
};

/// Synthetic stand-in for a real screen dataset; see synth.cpp for the
/// construction. Deterministic in config.seed.
Dataset synth_dataset(const SynthConfig& config);

/// Fixed vocabulary the synthetic descriptions are drawn from.
std::span<const std::string_view> synth_task_templates();
std::span<const std::string_view> synth_nouns();

}  // namespace uflow
