// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "uflow/dataset.hpp"
#include "uflow/matrix.hpp"
#include "uflow/training.hpp"

namespace uflow {

struct IndexEntry {
  std::string id;
  std::string description;
  std::size_t n_screens = 0;
  std::optional<std::string> archetype_label;
  std::vector<std::string> thumbnail_refs;

  bool operator==(const IndexEntry&) const = default;
};

/// Id-addressed store of unit-norm flow embeddings; immutable after build.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  /// Rows of `matrix` are normalized here. Throws on duplicate ids or a
  /// row/entry count mismatch.
  EmbeddingIndex(std::vector<IndexEntry> entries, Matrix<float> matrix, std::string model_id);

  /// Adopts rows as stored; throws Errc::format unless each is unit norm
  /// within 1e-5.
  static EmbeddingIndex from_normalized(std::vector<IndexEntry> entries, Matrix<float> matrix,
                                        std::string model_id);

  std::size_t size() const { return entries_.size(); }
  std::size_t dim() const { return matrix_.cols; }
  const std::vector<IndexEntry>& entries() const { return entries_; }
  const Matrix<float>& matrix() const { return matrix_; }
  const std::string& model_id() const { return model_id_; }

  std::optional<std::size_t> find(const std::string& id) const;
  std::span<const float> row(std::size_t i) const { return matrix_.row(i); }

  bool operator==(const EmbeddingIndex& o) const {
    return entries_ == o.entries_ && matrix_ == o.matrix_ && model_id_ == o.model_id_;
  }

 private:
  std::vector<IndexEntry> entries_;
  Matrix<float> matrix_;
  std::string model_id_;
  std::unordered_map<std::string, std::size_t> by_id_;

  void index_ids();
};

/// Pools every episode with the checkpoint and normalizes the rows.
EmbeddingIndex build_index(const Checkpoint& checkpoint, std::span<const Episode> episodes);

/// Index file: "UFIX" | u32 version=1 | u32 N | u32 dim | f32 N x dim |
/// manifest JSON (to end of file).
void write_index(const EmbeddingIndex& index, const std::filesystem::path& path);
EmbeddingIndex read_index(const std::filesystem::path& path);

struct RetrievalHit {
  std::string episode_id;
  float score = 0.0f;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

struct RetrievalResult {
  std::vector<RetrievalHit> entries;
};

/// Exact top-min(k, N) by cosine similarity. Scores descend; equal scores
/// order by ascending episode id. Throws Errc::usage for k < 1 or a query of
/// the wrong width, Errc::numeric for a zero or non-finite query.
RetrievalResult search(const EmbeddingIndex& index, std::span<const float> query, std::size_t k);

/// Full ranking (every entry) with the same ordering rules as search.
RetrievalResult rank_all(const EmbeddingIndex& index, std::span<const float> query);

/// Text embedding provider.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const { return kTextDim; }
  /// Throws Errc::provider when the provider cannot answer.
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

class ToyEmbedder final : public TextEmbedder {
 public:
  std::string name() const override { return "toy"; }
  std::vector<float> embed(std::string_view text) const override { return toy_text_embed(text); }
};

/// Exact-text lookup into stored embeddings.
class PrecomputedEmbedder final : public TextEmbedder {
 public:
  explicit PrecomputedEmbedder(std::unordered_map<std::string, std::vector<float>> table);
  /// Uses each episode's description -> text_embedding.
  static PrecomputedEmbedder from_dataset(const Dataset& dataset);
  /// JSON object {"text": [1536 floats], ...}.
  static PrecomputedEmbedder from_file(const std::filesystem::path& path);

  std::string name() const override { return "precomputed"; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::unordered_map<std::string, std::vector<float>> table_;
};

/// POSTs {"input": text} to `url` and accepts either {"embedding": [...]} or
/// {"data": [{"embedding": [...]}]}.
class HttpEmbedder final : public TextEmbedder {
 public:
  explicit HttpEmbedder(std::string url, int timeout_seconds = 10);
  std::string name() const override { return "http"; }
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::string url_;
  int timeout_seconds_;
};

/// "toy", "precomputed" (source = JSON file path) or "http" (source = URL).
std::unique_ptr<TextEmbedder> make_embedder(const std::string& name, const std::string& source = "");

RetrievalResult search_by_text(const EmbeddingIndex& index, std::string_view text,
                               const TextEmbedder& embedder, std::size_t k);

/// Pools `episode` with the checkpoint, then searches.
RetrievalResult search_by_sequence(const EmbeddingIndex& index, const Checkpoint& checkpoint,
                                   const Episode& episode, std::size_t k);

}  // namespace uflow
