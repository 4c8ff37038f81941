// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// Synthetic screen dataset.
//
// Archetypes: each gets a distinct description "<template with noun>" and
// max_len prototype screens, each i.i.d. N(0,1) in 1024-d then L2-normalized.
// Episodes: archetype uniform, length uniform in [min_len, max_len], the
// first `length` prototypes plus i.i.d. N(0, noise_sigma) per coordinate.

#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "uflow/dataset.hpp"
#include "uflow/error.hpp"
#include "uflow/rng.hpp"

namespace uflow {
namespace {

constexpr std::array<std::string_view, 40> kTemplates = {
    "search for {}",
    "add {} to a cart",
    "open the {} settings",
    "find the nearest {}",
    "buy {} online",
    "check the price of {}",
    "share a photo of {}",
    "set a reminder about {}",
    "book a table for {}",
    "read reviews of {}",
    "compare prices for {}",
    "save {} to favorites",
    "remove {} from the cart",
    "subscribe to {} updates",
    "turn off {} notifications",
    "install an app for {}",
    "watch a video about {}",
    "send a message about {}",
    "navigate to the {} store",
    "schedule delivery of {}",
    "track my order of {}",
    "rate the {} product",
    "filter results by {}",
    "create a list for {}",
    "look up directions to {}",
    "change the {} language",
    "download a guide on {}",
    "cancel the {} subscription",
    "report a problem with {}",
    "play music about {}",
    "translate the word {}",
    "view the {} history",
    "enable dark mode in {}",
    "sort {} by rating",
    "add a calendar event for {}",
    "check the weather in {}",
    "call the {} support line",
    "log in to the {} account",
    "pay the {} bill",
    "rename the {} folder",
};

constexpr std::array<std::string_view, 40> kNouns = {
    "batteries", "headphones", "coffee",   "shoes",    "groceries", "flights",  "hotels",   "pizza",
    "books",     "laptops",    "flowers",  "tickets",  "vitamins",  "jackets",  "cameras",  "tablets",
    "sunglasses", "backpacks", "chargers", "movies",   "podcasts",  "recipes",  "bicycles", "tires",
    "paint",     "furniture",  "lamps",    "watches",  "wallets",   "umbrellas", "toys",    "games",
    "jewelry",   "perfume",    "candles",  "plants",   "mattresses", "blenders", "printers", "keyboards",
};

std::string fill(std::string_view tmpl, std::string_view noun) {
  std::string out(tmpl);
  const auto at = out.find("{}");
  out.replace(at, 2, noun);
  return out;
}

}  // namespace

std::span<const std::string_view> synth_task_templates() { return kTemplates; }
std::span<const std::string_view> synth_nouns() { return kNouns; }

Dataset synth_dataset(const SynthConfig& config) {
  if (config.n_archetypes < 2) fail(Errc::usage, "synth: need at least 2 archetypes");
  if (config.n_episodes < 1) fail(Errc::usage, "synth: need at least 1 episode");
  if (!(config.noise_sigma >= 0.0) || !std::isfinite(config.noise_sigma))
    fail(Errc::usage, "synth: noise_sigma must be finite and non-negative");
  if (config.min_len < 1 || config.max_len < config.min_len)
    fail(Errc::usage, "synth: need 1 <= min_len <= max_len");
  if (config.n_archetypes > kTemplates.size() * kNouns.size())
    fail(Errc::usage, "synth: too many archetypes for the description vocabulary");

  struct Archetype {
    std::string label;
    std::string description;
    std::vector<std::vector<double>> prototypes;
    std::vector<float> text;
  };

  Rng arch_rng(mix_seed(config.seed, 1));
  std::set<std::pair<std::size_t, std::size_t>> used;
  std::vector<Archetype> archetypes(config.n_archetypes);
  for (std::size_t a = 0; a < config.n_archetypes; ++a) {
    Archetype& arch = archetypes[a];
    std::pair<std::size_t, std::size_t> pick;
    do {
      pick = {arch_rng.below(kTemplates.size()), arch_rng.below(kNouns.size())};
    } while (!used.insert(pick).second);
    arch.description = fill(kTemplates[pick.first], kNouns[pick.second]);
    char label[32];
    std::snprintf(label, sizeof label, "arch-%03zu", a);
    arch.label = label;
    arch.prototypes.resize(config.max_len);
    for (auto& proto : arch.prototypes) {
      proto.resize(kFeatureDim);
      double norm2 = 0.0;
      for (double& v : proto) {
        v = arch_rng.normal();
        norm2 += v * v;
      }
      const double inv = 1.0 / std::sqrt(norm2);
      for (double& v : proto) v *= inv;
    }
    arch.text = toy_text_embed(arch.description);
  }

  Dataset ds;
  ds.split_seed = config.seed;
  ds.meta = {{"source", "synthetic"},
             {"n_archetypes", std::to_string(config.n_archetypes)},
             {"n_episodes", std::to_string(config.n_episodes)},
             {"noise_sigma", std::to_string(config.noise_sigma)},
             {"seed", std::to_string(config.seed)},
             {"min_len", std::to_string(config.min_len)},
             {"max_len", std::to_string(config.max_len)}};

  Rng ep_rng(mix_seed(config.seed, 2));
  const std::size_t span = config.max_len - config.min_len + 1;
  ds.episodes.reserve(config.n_episodes);
  for (std::size_t e = 0; e < config.n_episodes; ++e) {
    const Archetype& arch = archetypes[ep_rng.below(config.n_archetypes)];
    const std::size_t len = config.min_len + ep_rng.below(span);
    Episode ep;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", e);
    ep.id = id;
    ep.description = arch.description;
    ep.archetype_label = arch.label;
    ep.text_embedding = arch.text;
    ep.features.resize(len * kFeatureDim);
    for (std::size_t s = 0; s < len; ++s)
      for (std::size_t d = 0; d < kFeatureDim; ++d)
        ep.features[s * kFeatureDim + d] =
            static_cast<float>(arch.prototypes[s][d] + config.noise_sigma * ep_rng.normal());
    ds.episodes.push_back(std::move(ep));
  }
  return ds;
}

}  // namespace uflow
