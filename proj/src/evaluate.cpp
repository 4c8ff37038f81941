// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "uflow/error.hpp"
#include "uflow/evalkit.hpp"
#include "uflow/retrieval.hpp"

namespace uflow {
namespace {

ArmResult score_arm(const EmbeddingIndex& index, std::span<const Episode> queries,
                    const std::vector<std::vector<float>>& query_vectors, const std::vector<RelevantSet>& truth,
                    const EvalSpec& spec) {
  std::vector<RankList> rankings;
  rankings.reserve(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    RankList ids;
    for (const RetrievalHit& hit : rank_all(index, query_vectors[q]).entries) {
      if (spec.relevance == Relevance::same_archetype && hit.episode_id == queries[q].id) continue;
      ids.push_back(hit.episode_id);
    }
    rankings.push_back(std::move(ids));
  }
  ArmResult arm;
  for (std::size_t k : spec.ks) arm.recall[k] = recall_at_k(rankings, truth, k);
  arm.median_rank = median_rank(rankings, truth);
  return arm;
}

}  // namespace

EvalReport evaluate(const Checkpoint& checkpoint, const Dataset& dataset, const EvalSpec& spec) {
  if (spec.ks.empty()) fail(Errc::usage, "eval: no k values");
  for (std::size_t i = 0; i < spec.ks.size(); ++i)
    if (spec.ks[i] < 1 || (i > 0 && spec.ks[i] <= spec.ks[i - 1]))
      fail(Errc::usage, "eval: k values must be >= 1 and strictly ascending");

  auto [train_set, val_set] = train_val_split(dataset, checkpoint.train);
  if (val_set.empty()) fail(Errc::usage, "eval: empty validation split");

  std::vector<Episode> all = std::move(train_set);
  all.insert(all.end(), val_set.begin(), val_set.end());

  std::vector<RelevantSet> truth(val_set.size());
  if (spec.relevance == Relevance::same_archetype) {
    std::map<std::string, RelevantSet> by_label;
    for (const Episode& ep : all) {
      if (!ep.archetype_label) fail(Errc::format, "eval: same-archetype relevance needs archetype labels");
      by_label[*ep.archetype_label].insert(ep.id);
    }
    for (std::size_t q = 0; q < val_set.size(); ++q) {
      truth[q] = by_label[*val_set[q].archetype_label];
      truth[q].erase(val_set[q].id);
      if (truth[q].empty())
        fail(Errc::usage, "eval: query '" + val_set[q].id + "' has no other episode of its archetype");
    }
  } else {
    for (std::size_t q = 0; q < val_set.size(); ++q) truth[q] = {val_set[q].id};
  }

  const EmbeddingIndex index = build_index(checkpoint, all);

  std::vector<std::vector<float>> text_queries, model_queries;
  for (const Episode& ep : val_set) {
    text_queries.push_back(ep.text_embedding);
    if (spec.protocol == Protocol::text_to_flow) {
      model_queries.push_back(ep.text_embedding);
    } else {
      const auto row = index.row(*index.find(ep.id));
      model_queries.emplace_back(row.begin(), row.end());
    }
  }

  std::vector<IndexEntry> entries = index.entries();
  Matrix<float> texts(all.size(), kTextDim);
  for (std::size_t i = 0; i < all.size(); ++i)
    std::copy(all[i].text_embedding.begin(), all[i].text_embedding.end(), texts.row(i).begin());
  const EmbeddingIndex text_index(std::move(entries), std::move(texts), "text-only");

  EvalReport report;
  report.protocol = spec.protocol;
  report.relevance = spec.relevance;
  report.n_queries = val_set.size();
  report.model = score_arm(index, val_set, model_queries, truth, spec);
  report.baseline = score_arm(text_index, val_set, text_queries, truth, spec);
  report.checkpoint_id = index.model_id();
  report.dataset_meta = dataset.meta;
  return report;
}

std::string to_json(const EvalReport& report, int indent) {
  using nlohmann::json;
  auto recall = [](const ArmResult& arm) {
    json r = json::object();
    for (const auto& [k, v] : arm.recall) r[std::to_string(k)] = v;
    return r;
  };
  const json j = {{"protocol", to_string(report.protocol)},
                  {"relevance", to_string(report.relevance)},
                  {"n_queries", report.n_queries},
                  {"recall", recall(report.model)},
                  {"median_rank", report.model.median_rank},
                  {"checkpoint_id", report.checkpoint_id},
                  {"dataset_meta", report.dataset_meta},
                  {"baseline",
                   {{"label", kBaselineLabel},
                    {"recall", recall(report.baseline)},
                    {"median_rank", report.baseline.median_rank}}}};
  return j.dump(indent);
}

}  // namespace uflow
