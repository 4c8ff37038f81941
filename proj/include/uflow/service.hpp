// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// Read-only HTTP retrieval service over an immutable index snapshot.
//
//   GET  /api/health                  {status, index_size, model_id}
//   POST /api/search/text             {query, k} -> {results: [...]}
//   POST /api/search/sequence         {episode_id, k} -> {results: [...]}
//   GET  /api/episodes/{id}           episode metadata
//   GET  /api/thumbnails/{id}/{idx}   image bytes or 404
//
// Errors are {error: {code, message}} with a 4xx/5xx status.

#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "uflow/retrieval.hpp"

namespace httplib {
class Server;
}

namespace uflow {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path index_path;
  std::filesystem::path checkpoint_path;
  std::string embedder = "toy";
  /// URL for "http", JSON file for "precomputed".
  std::string embedder_source;
  std::optional<std::filesystem::path> thumbnail_root;
  std::optional<std::filesystem::path> static_root;
  std::vector<std::string> cors_allowlist;

  /// Port range and presence of the index/checkpoint (and optional roots).
  void validate() const;
};

/// Parses a JSON config file. Relative paths resolve against the file's
/// directory.
ServiceConfig load_service_config(const std::filesystem::path& path);

/// Clamp applied to every search request's k.
inline constexpr std::size_t kMaxResults = 100;

class RetrievalService {
 public:
  /// Loads index, checkpoint and embedder named by `config`. The index must
  /// have been built from that checkpoint.
  explicit RetrievalService(const ServiceConfig& config);
  RetrievalService(const ServiceConfig& config, std::shared_ptr<const EmbeddingIndex> index,
                   std::unique_ptr<TextEmbedder> embedder);
  ~RetrievalService();

  RetrievalService(const RetrievalService&) = delete;
  RetrievalService& operator=(const RetrievalService&) = delete;

  /// Atomically replaces the index; in-flight requests keep the old one.
  void swap_index(std::shared_ptr<const EmbeddingIndex> index);
  std::shared_ptr<const EmbeddingIndex> snapshot() const;

  /// Binds host:port (port 0 picks a free one); returns the bound port.
  int bind();
  /// Serves until stop(); call after bind().
  void serve();
  void stop();
  bool running() const;

 private:
  void install_routes();

  ServiceConfig config_;
  std::unique_ptr<TextEmbedder> embedder_;
  std::unique_ptr<httplib::Server> server_;
  mutable std::mutex mu_;
  std::shared_ptr<const EmbeddingIndex> index_;
};

}  // namespace uflow
