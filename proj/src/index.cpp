// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

#include "uflow/binary_io.hpp"
#include "uflow/error.hpp"
#include "uflow/loss.hpp"
#include "uflow/retrieval.hpp"

namespace uflow {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "UFIX";
constexpr std::uint32_t kVersion = 1;

std::vector<float> normalized_query(std::span<const float> query, std::size_t dim) {
  if (query.size() != dim)
    fail(Errc::usage, "query has " + std::to_string(query.size()) + " values, index dim is " +
                          std::to_string(dim));
  double norm2 = 0.0;
  for (float x : query) norm2 += static_cast<double>(x) * static_cast<double>(x);
  if (!std::isfinite(norm2)) fail(Errc::numeric, "query is not finite");
  if (norm2 == 0.0) fail(Errc::numeric, "query has zero norm");
  const double inv = 1.0 / std::sqrt(norm2);
  std::vector<float> q(query.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<float>(query[i] * inv);
  return q;
}

RetrievalResult ranked(const EmbeddingIndex& index, std::span<const float> query, std::size_t k) {
  const auto q = normalized_query(query, index.dim());
  const std::size_t n = index.size();
  std::vector<float> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = linalg::dot<float>(index.row(i), std::span<const float>(q));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& entries = index.entries();
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return entries[a].id < entries[b].id;
  };
  const std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), before);

  RetrievalResult out;
  out.entries.reserve(take);
  for (std::size_t r = 0; r < take; ++r)
    out.entries.push_back({entries[order[r]].id, scores[order[r]], r + 1});
  return out;
}

}  // namespace

EmbeddingIndex::EmbeddingIndex(std::vector<IndexEntry> entries, Matrix<float> matrix, std::string model_id)
    : entries_(std::move(entries)), model_id_(std::move(model_id)) {
  if (entries_.size() != matrix.rows)
    fail(Errc::format, "index: " + std::to_string(entries_.size()) + " entries but " +
                           std::to_string(matrix.rows) + " rows");
  matrix_ = matrix.rows ? normalize_rows(matrix) : std::move(matrix);
  index_ids();
}

EmbeddingIndex EmbeddingIndex::from_normalized(std::vector<IndexEntry> entries, Matrix<float> matrix,
                                               std::string model_id) {
  if (entries.size() != matrix.rows)
    fail(Errc::format, "index: " + std::to_string(entries.size()) + " entries but " +
                           std::to_string(matrix.rows) + " rows");
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    double norm2 = 0.0;
    for (float x : matrix.row(i)) norm2 += static_cast<double>(x) * static_cast<double>(x);
    if (!(std::fabs(std::sqrt(norm2) - 1.0) <= 1e-5))
      fail(Errc::format, "index: row " + std::to_string(i) + " is not unit norm");
  }
  EmbeddingIndex index;
  index.entries_ = std::move(entries);
  index.matrix_ = std::move(matrix);
  index.model_id_ = std::move(model_id);
  index.index_ids();
  return index;
}

void EmbeddingIndex::index_ids() {
  by_id_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!by_id_.emplace(entries_[i].id, i).second)
      fail(Errc::format, "index: duplicate id '" + entries_[i].id + "'");
}

std::optional<std::size_t> EmbeddingIndex::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

EmbeddingIndex build_index(const Checkpoint& checkpoint, std::span<const Episode> episodes) {
  const PoolerConfig& c = checkpoint.params.config;
  if (c.d_vis != kFeatureDim || c.d_out != kTextDim)
    fail(Errc::format, "index: checkpoint dims " + std::to_string(c.d_vis) + " -> " + std::to_string(c.d_out) +
                           " do not match dataset dims " + std::to_string(kFeatureDim) + " -> " +
                           std::to_string(kTextDim));
  std::vector<IndexEntry> entries;
  entries.reserve(episodes.size());
  for (const Episode& ep : episodes)
    entries.push_back({ep.id, ep.description, ep.n_screens(), ep.archetype_label, ep.thumbnail_refs});
  return EmbeddingIndex(std::move(entries), embed_episodes(checkpoint.params, episodes),
                        checkpoint_id(checkpoint));
}

void write_index(const EmbeddingIndex& index, const std::filesystem::path& path) {
  bin::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(index.size()));
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.f32s(index.matrix().data);
  json entries = json::array();
  for (const IndexEntry& e : index.entries()) {
    json rec = {{"id", e.id}, {"description", e.description}, {"n_screens", e.n_screens}};
    if (e.archetype_label) rec["archetype_label"] = *e.archetype_label;
    if (!e.thumbnail_refs.empty()) rec["thumbnail_refs"] = e.thumbnail_refs;
    entries.push_back(std::move(rec));
  }
  const json manifest = {{"format", "uflow-index"}, {"model_id", index.model_id()}, {"entries", std::move(entries)}};
  w.str(manifest.dump());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bin::write_file_atomic(path, w.buffer());
}

EmbeddingIndex read_index(const std::filesystem::path& path) {
  const auto bytes = bin::read_file(path);
  bin::Reader r(bytes, "index");
  r.expect_magic(kMagic);
  if (const auto v = r.u32(); v != kVersion) fail(Errc::format, "index: unsupported version " + std::to_string(v));
  const std::uint32_t n = r.u32();
  const std::uint32_t dim = r.u32();
  if (dim != kTextDim)
    fail(Errc::format, "index: header dim " + std::to_string(dim) + ", expected " + std::to_string(kTextDim));
  Matrix<float> m(n, dim);
  r.f32s(m.data);
  json manifest;
  try {
    manifest = json::parse(r.str(r.remaining()));
  } catch (const json::parse_error& e) {
    fail(Errc::format, std::string("index: invalid manifest JSON: ") + e.what());
  }
  std::vector<IndexEntry> entries;
  try {
    for (const json& rec : manifest.at("entries")) {
      IndexEntry e;
      e.id = rec.at("id").get<std::string>();
      e.description = rec.at("description").get<std::string>();
      e.n_screens = rec.at("n_screens").get<std::size_t>();
      if (rec.contains("archetype_label")) e.archetype_label = rec["archetype_label"].get<std::string>();
      if (rec.contains("thumbnail_refs")) e.thumbnail_refs = rec["thumbnail_refs"].get<std::vector<std::string>>();
      entries.push_back(std::move(e));
    }
    return EmbeddingIndex::from_normalized(std::move(entries), std::move(m),
                                           manifest.at("model_id").get<std::string>());
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("index: malformed manifest: ") + e.what());
  }
}

RetrievalResult search(const EmbeddingIndex& index, std::span<const float> query, std::size_t k) {
  if (k < 1) fail(Errc::usage, "k must be >= 1");
  return ranked(index, query, k);
}

RetrievalResult rank_all(const EmbeddingIndex& index, std::span<const float> query) {
  return ranked(index, query, index.size());
}

RetrievalResult search_by_text(const EmbeddingIndex& index, std::string_view text, const TextEmbedder& embedder,
                               std::size_t k) {
  const std::vector<float> q = embedder.embed(text);
  if (q.size() != index.dim())
    fail(Errc::provider, "embedder '" + embedder.name() + "' returned " + std::to_string(q.size()) +
                             " values, expected " + std::to_string(index.dim()));
  return search(index, q, k);
}

RetrievalResult search_by_sequence(const EmbeddingIndex& index, const Checkpoint& checkpoint,
                                   const Episode& episode, std::size_t k) {
  const Matrix<float> pooled = embed_episodes(checkpoint.params, std::span<const Episode>(&episode, 1));
  return search(index, pooled.row(0), k);
}

}  // namespace uflow
