// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// Dataset directory:
//   manifest.json  episode records and byte offsets (docs/formats.md)
//   features.bin   "UFD1" | u32 version=1 | u32 dim=1024 | f32 screens...
//   texts.bin      "UFD1" | u32 version=1 | u32 dim=1536 | f32 embeddings...

#include <json.hpp>

#include "uflow/binary_io.hpp"
#include "uflow/dataset.hpp"
#include "uflow/error.hpp"

namespace uflow {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "UFD1";
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 12;

void read_header(bin::Reader& r, std::size_t expected_dim) {
  r.expect_magic(kMagic);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(Errc::format, r.what() + ": unsupported version " + std::to_string(version) + ", expected " +
                           std::to_string(kVersion));
  const std::uint32_t dim = r.u32();
  if (dim != expected_dim)
    fail(Errc::format, r.what() + ": header vector dimension " + std::to_string(dim) + ", expected " +
                           std::to_string(expected_dim));
}

template <typename T>
T field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) fail(Errc::format, "manifest.json: " + ctx + " missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(Errc::format, "manifest.json: " + ctx + " field '" + key + "' has the wrong type");
  }
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  validate(dataset);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(Errc::io, "cannot create '" + dir.string() + "': " + ec.message());

  bin::Writer feats, texts;
  for (auto* w : {&feats, &texts}) {
    w->magic(kMagic);
    w->u32(kVersion);
  }
  feats.u32(kFeatureDim);
  texts.u32(kTextDim);

  json episodes = json::array();
  for (const Episode& ep : dataset.episodes) {
    json rec = {{"id", ep.id},
                {"description", ep.description},
                {"n_screens", ep.n_screens()},
                {"feature_offset", feats.buffer().size()},
                {"text_offset", texts.buffer().size()}};
    if (ep.archetype_label) rec["archetype_label"] = *ep.archetype_label;
    if (!ep.thumbnail_refs.empty()) rec["thumbnail_refs"] = ep.thumbnail_refs;
    episodes.push_back(std::move(rec));
    feats.f32s(ep.features);
    texts.f32s(ep.text_embedding);
  }

  const json manifest = {{"format", "uflow-dataset"},
                         {"version", kVersion},
                         {"feature_dim", kFeatureDim},
                         {"text_dim", kTextDim},
                         {"split_seed", dataset.split_seed},
                         {"meta", dataset.meta},
                         {"episodes", std::move(episodes)}};
  const std::string text = manifest.dump(2) + "\n";

  bin::write_file_atomic(dir / "features.bin", feats.buffer());
  bin::write_file_atomic(dir / "texts.bin", texts.buffer());
  bin::write_file_atomic(dir / "manifest.json",
                         {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_bytes = bin::read_file(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::parse_error& e) {
    fail(Errc::format, std::string("manifest.json: invalid JSON: ") + e.what());
  }
  const auto version = field<std::uint32_t>(manifest, "version", "root");
  if (version != kVersion)
    fail(Errc::format, "manifest.json: unsupported version " + std::to_string(version));
  if (const auto d = field<std::size_t>(manifest, "feature_dim", "root"); d != kFeatureDim)
    fail(Errc::format, "manifest.json: feature_dim " + std::to_string(d) + ", expected " +
                           std::to_string(kFeatureDim));
  if (const auto d = field<std::size_t>(manifest, "text_dim", "root"); d != kTextDim)
    fail(Errc::format, "manifest.json: text_dim " + std::to_string(d) + ", expected " +
                           std::to_string(kTextDim));

  Dataset ds;
  ds.split_seed = field<std::uint64_t>(manifest, "split_seed", "root");
  if (manifest.contains("meta")) ds.meta = manifest["meta"].get<std::map<std::string, std::string>>();

  const json& records = manifest.at("episodes");
  std::size_t total_screens = 0;
  for (const json& rec : records) total_screens += field<std::size_t>(rec, "n_screens", "episode");

  const auto feat_bytes = bin::read_file(dir / "features.bin");
  const auto text_bytes = bin::read_file(dir / "texts.bin");
  const std::size_t want_feat = kHeaderBytes + total_screens * kFeatureDim * sizeof(float);
  const std::size_t want_text = kHeaderBytes + records.size() * kTextDim * sizeof(float);

  bin::Reader fr(feat_bytes, "features.bin");
  bin::Reader tr(text_bytes, "texts.bin");
  read_header(fr, kFeatureDim);
  read_header(tr, kTextDim);
  if (feat_bytes.size() != want_feat)
    fail(Errc::format, "features.bin: expected " + std::to_string(want_feat) + " bytes, got " +
                           std::to_string(feat_bytes.size()));
  if (text_bytes.size() != want_text)
    fail(Errc::format, "texts.bin: expected " + std::to_string(want_text) + " bytes, got " +
                           std::to_string(text_bytes.size()));

  ds.episodes.reserve(records.size());
  for (const json& rec : records) {
    Episode ep;
    ep.id = field<std::string>(rec, "id", "episode");
    const std::string ctx = "episode '" + ep.id + "'";
    ep.description = field<std::string>(rec, "description", ctx);
    const auto n = field<std::size_t>(rec, "n_screens", ctx);
    if (n == 0) fail(Errc::format, "manifest.json: " + ctx + " has zero screens");
    if (field<std::size_t>(rec, "feature_offset", ctx) != fr.position())
      fail(Errc::format, "manifest.json: " + ctx + " feature_offset does not match layout");
    if (field<std::size_t>(rec, "text_offset", ctx) != tr.position())
      fail(Errc::format, "manifest.json: " + ctx + " text_offset does not match layout");
    if (rec.contains("archetype_label")) ep.archetype_label = rec["archetype_label"].get<std::string>();
    if (rec.contains("thumbnail_refs")) ep.thumbnail_refs = rec["thumbnail_refs"].get<std::vector<std::string>>();
    ep.features.resize(n * kFeatureDim);
    ep.text_embedding.resize(kTextDim);
    fr.f32s(ep.features);
    tr.f32s(ep.text_embedding);
    ds.episodes.push_back(std::move(ep));
  }
  validate(ds);
  return ds;
}

}  // namespace uflow
