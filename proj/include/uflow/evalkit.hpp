// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "uflow/dataset.hpp"
#include "uflow/training.hpp"

namespace uflow {

using RankList = std::vector<std::string>;
using RelevantSet = std::set<std::string>;

/// 1-based rank of the first relevant id in `ranking`, or ranking.size() + 1
/// when none is present.
std::size_t first_relevant_rank(const RankList& ranking, const RelevantSet& relevant);

/// Fraction of queries with at least one relevant id in the top k.
/// Throws Errc::usage for k < 1, mismatched sizes, or an empty relevant set.
double recall_at_k(std::span<const RankList> rankings, std::span<const RelevantSet> truth, std::size_t k);

/// Median of first-relevant ranks; for an even count, the mean of the two
/// middle values.
double median_rank(std::span<const RankList> rankings, std::span<const RelevantSet> truth);

enum class Protocol { text_to_flow, flow_to_flow };
enum class Relevance { exact_episode, same_archetype };

std::string to_string(Protocol p);
std::string to_string(Relevance r);
Protocol parse_protocol(std::string_view s);
Relevance parse_relevance(std::string_view s);

struct EvalSpec {
  std::vector<std::size_t> ks = {1, 5, 10};
  Protocol protocol = Protocol::flow_to_flow;
  Relevance relevance = Relevance::same_archetype;
};

struct ArmResult {
  std::map<std::size_t, double> recall;
  double median_rank = 0.0;
};

struct EvalReport {
  Protocol protocol = Protocol::flow_to_flow;
  Relevance relevance = Relevance::same_archetype;
  std::size_t n_queries = 0;
  ArmResult model;
  /// Retrieval over the indexed episodes' own text embeddings.
  ArmResult baseline;
  std::string checkpoint_id;
  std::map<std::string, std::string> dataset_meta;
};

inline constexpr std::string_view kBaselineLabel = "baseline: text-only, toy/provider embedder";

/// Index = train + validation episodes (after the checkpoint's length
/// filter); queries = validation episodes. Under same-archetype relevance the
/// query episode is removed from its own ranking. Deterministic.
EvalReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const EvalSpec& spec);

/// {protocol, relevance, n_queries, recall: {k: value}, median_rank,
///  checkpoint_id, dataset_meta, baseline: {label, recall, median_rank}}
std::string to_json(const EvalReport& report, int indent = 2);

}  // namespace uflow
