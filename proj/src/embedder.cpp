// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <httplib.h>

#include <json.hpp>

#include "uflow/binary_io.hpp"
#include "uflow/error.hpp"
#include "uflow/retrieval.hpp"

namespace uflow {

using nlohmann::json;

PrecomputedEmbedder::PrecomputedEmbedder(std::unordered_map<std::string, std::vector<float>> table)
    : table_(std::move(table)) {
  for (const auto& [text, vec] : table_)
    if (vec.size() != kTextDim)
      fail(Errc::format, "precomputed embedding for '" + text + "' has " + std::to_string(vec.size()) +
                             " values, expected " + std::to_string(kTextDim));
}

PrecomputedEmbedder PrecomputedEmbedder::from_dataset(const Dataset& dataset) {
  std::unordered_map<std::string, std::vector<float>> table;
  for (const Episode& ep : dataset.episodes) table.emplace(ep.description, ep.text_embedding);
  return PrecomputedEmbedder(std::move(table));
}

PrecomputedEmbedder PrecomputedEmbedder::from_file(const std::filesystem::path& path) {
  const auto bytes = bin::read_file(path);
  try {
    return PrecomputedEmbedder(
        json::parse(bytes.begin(), bytes.end()).get<std::unordered_map<std::string, std::vector<float>>>());
  } catch (const json::exception& e) {
    fail(Errc::format, "precomputed embeddings '" + path.string() + "': " + e.what());
  }
}

std::vector<float> PrecomputedEmbedder::embed(std::string_view text) const {
  const auto it = table_.find(std::string(text));
  if (it == table_.end()) fail(Errc::provider, "no precomputed embedding for the query text");
  return it->second;
}

HttpEmbedder::HttpEmbedder(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {
  if (url_.rfind("http://", 0) != 0) fail(Errc::usage, "http embedder needs an http:// URL, got '" + url_ + "'");
}

std::vector<float> HttpEmbedder::embed(std::string_view text) const {
  const auto slash = url_.find('/', 7);
  const std::string base = slash == std::string::npos ? url_ : url_.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url_.substr(slash);

  httplib::Client client(base);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  const json body = {{"input", std::string(text)}};
  const auto res = client.Post(path, body.dump(), "application/json");
  if (!res) fail(Errc::provider, "embedding provider at " + url_ + " unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    fail(Errc::provider, "embedding provider at " + url_ + " returned HTTP " + std::to_string(res->status));

  std::vector<float> out;
  try {
    const json reply = json::parse(res->body);
    if (reply.contains("embedding"))
      out = reply["embedding"].get<std::vector<float>>();
    else
      out = reply.at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const json::exception& e) {
    fail(Errc::provider, std::string("embedding provider sent an unexpected reply: ") + e.what());
  }
  if (out.size() != kTextDim)
    fail(Errc::provider, "embedding provider returned " + std::to_string(out.size()) + " values, expected " +
                             std::to_string(kTextDim));
  return out;
}

std::unique_ptr<TextEmbedder> make_embedder(const std::string& name, const std::string& source) {
  if (name == "toy") return std::make_unique<ToyEmbedder>();
  if (name == "precomputed") return std::make_unique<PrecomputedEmbedder>(PrecomputedEmbedder::from_file(source));
  if (name == "http") return std::make_unique<HttpEmbedder>(source);
  fail(Errc::usage, "unknown embedder '" + name + "' (expected toy, precomputed or http)");
}

}  // namespace uflow
