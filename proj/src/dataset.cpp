// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "uflow/dataset.hpp"
#include "uflow/error.hpp"
#include "uflow/rng.hpp"

namespace uflow {

void validate(const Dataset& dataset) {
  std::unordered_set<std::string> seen;
  for (const Episode& ep : dataset.episodes) {
    if (!seen.insert(ep.id).second) fail(Errc::format, "duplicate episode id '" + ep.id + "'");
    if (ep.features.empty() || ep.features.size() % kFeatureDim != 0)
      fail(Errc::format, "episode '" + ep.id + "': features must be a non-empty multiple of " +
                             std::to_string(kFeatureDim) + " floats, got " +
                             std::to_string(ep.features.size()));
    if (ep.text_embedding.size() != kTextDim)
      fail(Errc::format, "episode '" + ep.id + "': text_embedding has " +
                             std::to_string(ep.text_embedding.size()) + " values, expected " +
                             std::to_string(kTextDim));
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(ep.features.begin(), ep.features.end(), finite) ||
        !std::all_of(ep.text_embedding.begin(), ep.text_embedding.end(), finite))
      fail(Errc::format, "episode '" + ep.id + "': non-finite value");
  }
}

std::vector<Episode> filter_episodes(std::span<const Episode> episodes, std::size_t min_len,
                                     std::size_t max_len) {
  if (min_len < 1 || max_len < min_len)
    fail(Errc::usage, "filter bounds must satisfy 1 <= min_len <= max_len");
  std::vector<Episode> kept;
  for (const Episode& ep : episodes) {
    const std::size_t n = ep.n_screens();
    if (n >= min_len && n <= max_len) kept.push_back(ep);
  }
  return kept;
}

std::pair<std::vector<Episode>, std::vector<Episode>> split(std::span<const Episode> episodes,
                                                            double train_fraction,
                                                            std::uint64_t seed) {
  const std::size_t n = episodes.size();
  if (n < 2) fail(Errc::usage, "split needs at least 2 episodes, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(Errc::usage, "train_fraction must be in (0, 1)");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5311));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::pair<std::vector<Episode>, std::vector<Episode>> out;
  out.first.reserve(n_train);
  out.second.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? out.first : out.second).push_back(episodes[order[i]]);
  return out;
}

}  // namespace uflow
