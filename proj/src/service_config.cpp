// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "uflow/binary_io.hpp"
#include "uflow/error.hpp"
#include "uflow/service.hpp"

namespace uflow {

void ServiceConfig::validate() const {
  if (port < 1 || port > 65535) fail(Errc::usage, "service: port must be in [1, 65535]");
  if (!std::filesystem::exists(index_path)) fail(Errc::io, "service: index '" + index_path.string() + "' not found");
  if (!std::filesystem::exists(checkpoint_path))
    fail(Errc::io, "service: checkpoint '" + checkpoint_path.string() + "' not found");
  if (thumbnail_root && !std::filesystem::is_directory(*thumbnail_root))
    fail(Errc::io, "service: thumbnail_root '" + thumbnail_root->string() + "' is not a directory");
  if (static_root && !std::filesystem::is_directory(*static_root))
    fail(Errc::io, "service: static_root '" + static_root->string() + "' is not a directory");
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  using nlohmann::json;
  const auto bytes = bin::read_file(path);
  const std::filesystem::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path fp(p);
    return fp.is_absolute() || base.empty() ? fp : base / fp;
  };
  ServiceConfig cfg;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    cfg.host = j.value("host", cfg.host);
    cfg.port = j.value("port", cfg.port);
    cfg.index_path = resolve(j.at("index").get<std::string>());
    cfg.checkpoint_path = resolve(j.at("checkpoint").get<std::string>());
    if (j.contains("embedder")) {
      const json& e = j["embedder"];
      cfg.embedder = e.value("provider", cfg.embedder);
      cfg.embedder_source = e.value("url", std::string());
      if (cfg.embedder == "precomputed" && !cfg.embedder_source.empty())
        cfg.embedder_source = resolve(cfg.embedder_source).string();
    }
    if (j.contains("thumbnail_root")) cfg.thumbnail_root = resolve(j["thumbnail_root"].get<std::string>());
    if (j.contains("static_root")) cfg.static_root = resolve(j["static_root"].get<std::string>());
    cfg.cors_allowlist = j.value("cors_allowlist", std::vector<std::string>{});
  } catch (const json::exception& e) {
    fail(Errc::format, "service config '" + path.string() + "': " + e.what());
  }
  return cfg;
}

}  // namespace uflow
