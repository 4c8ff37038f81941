// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "uflow/error.hpp"
#include "uflow/evalkit.hpp"

namespace uflow {
namespace {

void check(std::span<const RankList> rankings, std::span<const RelevantSet> truth) {
  if (rankings.size() != truth.size()) fail(Errc::usage, "rankings and truth sets differ in count");
  if (rankings.empty()) fail(Errc::usage, "no queries to score");
  for (const auto& t : truth)
    if (t.empty()) fail(Errc::usage, "every query needs at least one relevant id");
}

}  // namespace

std::size_t first_relevant_rank(const RankList& ranking, const RelevantSet& relevant) {
  for (std::size_t i = 0; i < ranking.size(); ++i)
    if (relevant.contains(ranking[i])) return i + 1;
  return ranking.size() + 1;
}

double recall_at_k(std::span<const RankList> rankings, std::span<const RelevantSet> truth, std::size_t k) {
  if (k < 1) fail(Errc::usage, "recall@k needs k >= 1");
  check(rankings, truth);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q)
    if (first_relevant_rank(rankings[q], truth[q]) <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double median_rank(std::span<const RankList> rankings, std::span<const RelevantSet> truth) {
  check(rankings, truth);
  std::vector<std::size_t> ranks;
  ranks.reserve(rankings.size());
  for (std::size_t q = 0; q < rankings.size(); ++q) ranks.push_back(first_relevant_rank(rankings[q], truth[q]));
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
  return 0.5 * static_cast<double>(ranks[n / 2 - 1] + ranks[n / 2]);
}

std::string to_string(Protocol p) { return p == Protocol::text_to_flow ? "text->flow" : "flow->flow"; }
std::string to_string(Relevance r) { return r == Relevance::exact_episode ? "exact-episode" : "same-archetype"; }

Protocol parse_protocol(std::string_view s) {
  if (s == "text->flow" || s == "text") return Protocol::text_to_flow;
  if (s == "flow->flow" || s == "flow") return Protocol::flow_to_flow;
  fail(Errc::usage, "unknown protocol '" + std::string(s) + "' (expected text->flow or flow->flow)");
}

Relevance parse_relevance(std::string_view s) {
  if (s == "exact-episode") return Relevance::exact_episode;
  if (s == "same-archetype") return Relevance::same_archetype;
  fail(Errc::usage, "unknown relevance '" + std::string(s) + "' (expected exact-episode or same-archetype)");
}

}  // namespace uflow
