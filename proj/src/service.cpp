// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <json.hpp>

#include "uflow/binary_io.hpp"
#include "uflow/error.hpp"

namespace uflow {
namespace {

using nlohmann::json;

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

std::string thumbnail_url(const std::string& id, std::size_t idx) {
  return "/api/thumbnails/" + httplib::detail::encode_url(id) + "/" + std::to_string(idx);
}

json thumbnails(const IndexEntry& e) {
  json urls = json::array();
  for (std::size_t i = 0; i < e.thumbnail_refs.size(); ++i) urls.push_back(thumbnail_url(e.id, i));
  return urls;
}

json results_json(const EmbeddingIndex& index, const RetrievalResult& result) {
  json out = json::array();
  for (const RetrievalHit& hit : result.entries) {
    const IndexEntry& e = index.entries()[*index.find(hit.episode_id)];
    out.push_back({{"episode_id", hit.episode_id},
                   {"rank", hit.rank},
                   {"score", hit.score},
                   {"description", e.description},
                   {"thumbnails", thumbnails(e)}});
  }
  return json{{"results", std::move(out)}};
}

// Parses the request body; k defaults to 10 and is clamped to [1, kMaxResults].
std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res, std::size_t& k) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error&) {
    send_error(res, 400, "invalid_request", "request body is not valid JSON");
    return std::nullopt;
  }
  if (!body.is_object()) {
    send_error(res, 400, "invalid_request", "request body must be a JSON object");
    return std::nullopt;
  }
  long long want = 10;
  if (body.contains("k")) {
    if (!body["k"].is_number_integer()) {
      send_error(res, 400, "invalid_request", "k must be an integer");
      return std::nullopt;
    }
    want = body["k"].get<long long>();
  }
  k = static_cast<std::size_t>(std::clamp<long long>(want, 1, static_cast<long long>(kMaxResults)));
  return body;
}

std::string content_type_for(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

}  // namespace

RetrievalService::RetrievalService(const ServiceConfig& config) : config_(config) {
  config_.validate();
  auto index = std::make_shared<const EmbeddingIndex>(read_index(config_.index_path));
  const Checkpoint ckpt = read_checkpoint(config_.checkpoint_path);
  if (checkpoint_id(ckpt) != index->model_id())
    fail(Errc::format, "service: index was built from model " + index->model_id() + ", checkpoint is " +
                           checkpoint_id(ckpt));
  index_ = std::move(index);
  embedder_ = make_embedder(config_.embedder, config_.embedder_source);
  install_routes();
}

RetrievalService::RetrievalService(const ServiceConfig& config, std::shared_ptr<const EmbeddingIndex> index,
                                   std::unique_ptr<TextEmbedder> embedder)
    : config_(config), embedder_(std::move(embedder)), index_(std::move(index)) {
  install_routes();
}

RetrievalService::~RetrievalService() { stop(); }

void RetrievalService::swap_index(std::shared_ptr<const EmbeddingIndex> index) {
  std::lock_guard lock(mu_);
  index_ = std::move(index);
}

std::shared_ptr<const EmbeddingIndex> RetrievalService::snapshot() const {
  std::lock_guard lock(mu_);
  return index_;
}

int RetrievalService::bind() {
  if (config_.port == 0) {
    const int port = server_->bind_to_any_port(config_.host);
    if (port < 0) fail(Errc::io, "service: cannot bind " + config_.host);
    return port;
  }
  if (!server_->bind_to_port(config_.host, config_.port))
    fail(Errc::io, "service: cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return config_.port;
}

void RetrievalService::serve() { server_->listen_after_bind(); }

void RetrievalService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

bool RetrievalService::running() const { return server_ && server_->is_running(); }

void RetrievalService::install_routes() {
  server_ = std::make_unique<httplib::Server>();
  httplib::Server& srv = *server_;

  srv.set_post_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_header("Origin")) return;
    const std::string origin = req.get_header_value("Origin");
    const auto& allow = config_.cors_allowlist;
    if (std::find(allow.begin(), allow.end(), "*") != allow.end() ||
        std::find(allow.begin(), allow.end(), origin) != allow.end()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::usage: send_error(res, 400, "invalid_request", e.what()); break;
        case Errc::not_found: send_error(res, 404, "not_found", e.what()); break;
        case Errc::provider: send_error(res, 502, "provider_error", e.what()); break;
        default: send_error(res, 500, std::string(errc_name(e.code())), e.what()); break;
      }
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });

  srv.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    const auto index = snapshot();
    send_json(res, {{"status", "ok"}, {"index_size", index->size()}, {"model_id", index->model_id()}});
  });

  srv.Post("/api/search/text", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t k = 0;
    const auto body = parse_body(req, res, k);
    if (!body) return;
    if (!body->contains("query") || !(*body)["query"].is_string())
      return send_error(res, 400, "invalid_request", "query must be a string");
    const auto index = snapshot();
    const auto result = search_by_text(*index, (*body)["query"].get<std::string>(), *embedder_, k);
    send_json(res, results_json(*index, result));
  });

  srv.Post("/api/search/sequence", [this](const httplib::Request& req, httplib::Response& res) {
    std::size_t k = 0;
    const auto body = parse_body(req, res, k);
    if (!body) return;
    if (!body->contains("episode_id") || !(*body)["episode_id"].is_string())
      return send_error(res, 400, "invalid_request", "episode_id must be a string");
    const std::string id = (*body)["episode_id"].get<std::string>();
    const auto index = snapshot();
    const auto row = index->find(id);
    if (!row) return send_error(res, 404, "episode_not_found", "no episode '" + id + "' in the index");
    send_json(res, results_json(*index, search(*index, index->row(*row), k)));
  });

  srv.Get(R"(/api/episodes/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = httplib::detail::decode_url(req.matches[1], false);
    const auto index = snapshot();
    const auto row = index->find(id);
    if (!row) return send_error(res, 404, "episode_not_found", "no episode '" + id + "' in the index");
    const IndexEntry& e = index->entries()[*row];
    json body = {{"episode_id", e.id},
                 {"description", e.description},
                 {"n_screens", e.n_screens},
                 {"thumbnails", thumbnails(e)}};
    if (e.archetype_label) body["archetype_label"] = *e.archetype_label;
    send_json(res, body);
  });

  srv.Get(R"(/api/thumbnails/([^/]+)/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = httplib::detail::decode_url(req.matches[1], false);
    const auto index = snapshot();
    const auto row = index->find(id);
    if (!row) return send_error(res, 404, "episode_not_found", "no episode '" + id + "' in the index");
    const IndexEntry& e = index->entries()[*row];
    const std::size_t idx = std::stoul(req.matches[2]);
    if (!config_.thumbnail_root || idx >= e.thumbnail_refs.size())
      return send_error(res, 404, "thumbnail_not_found", "no thumbnail " + std::to_string(idx) + " for '" + id + "'");
    const std::filesystem::path root = config_.thumbnail_root->lexically_normal();
    const std::filesystem::path file = (root / e.thumbnail_refs[idx]).lexically_normal();
    const auto rel = file.lexically_relative(root);
    if (rel.empty() || *rel.begin() == ".." || !std::filesystem::is_regular_file(file))
      return send_error(res, 404, "thumbnail_not_found", "thumbnail file missing");
    const auto bytes = bin::read_file(file);
    res.set_content(std::string(bytes.begin(), bytes.end()), content_type_for(file));
  });

  if (config_.static_root) srv.set_mount_point("/", config_.static_root->string());
}

}  // namespace uflow
