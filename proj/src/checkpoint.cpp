// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <json.hpp>

#include "uflow/binary_io.hpp"
#include "uflow/error.hpp"
#include "uflow/training.hpp"

namespace uflow {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "UFPC";
constexpr std::uint32_t kVersion = 1;

json config_json(const Checkpoint& c) {
  const PoolerConfig& p = c.params.config;
  const TrainConfig& t = c.train;
  return {{"pooler",
           {{"d_vis", p.d_vis},
            {"d_model", p.d_model},
            {"d_out", p.d_out},
            {"n_heads", p.n_heads},
            {"max_len", p.max_len},
            {"mlp_hidden", p.mlp_hidden},
            {"ln_eps", p.ln_eps},
            {"activation", "gelu"}}},
          {"train",
           {{"lr", t.lr},
            {"batch_size", t.batch_size},
            {"epochs", t.epochs},
            {"temperature", t.temperature},
            {"train_fraction", t.train_fraction},
            {"seed", t.seed},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"adam_eps", t.adam_eps},
            {"min_len", t.min_len},
            {"max_len", t.max_len}}}};
}

template <typename V>
V get(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<V>();
  } catch (const json::exception&) {
    fail(Errc::format, std::string("checkpoint config: missing or invalid ") + section + "." + key);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  bin::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  const std::string cfg = config_json(ckpt).dump();
  w.u32(static_cast<std::uint32_t>(cfg.size()));
  w.str(cfg);
  const auto tensors = ckpt.params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (std::size_t d : t.dims) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t.values);
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  bin::Reader r(bytes, "checkpoint");
  r.expect_magic(kMagic);
  if (const auto v = r.u32(); v != kVersion)
    fail(Errc::format, "checkpoint: unsupported version " + std::to_string(v));
  const std::string cfg_text = r.str(r.u32());
  json cfg;
  try {
    cfg = json::parse(cfg_text);
  } catch (const json::parse_error& e) {
    fail(Errc::format, std::string("checkpoint: invalid config JSON: ") + e.what());
  }

  PoolerConfig pc;
  pc.d_vis = get<std::size_t>(cfg, "pooler", "d_vis");
  pc.d_model = get<std::size_t>(cfg, "pooler", "d_model");
  pc.d_out = get<std::size_t>(cfg, "pooler", "d_out");
  pc.n_heads = get<std::size_t>(cfg, "pooler", "n_heads");
  pc.max_len = get<std::size_t>(cfg, "pooler", "max_len");
  pc.mlp_hidden = get<std::size_t>(cfg, "pooler", "mlp_hidden");
  pc.ln_eps = get<double>(cfg, "pooler", "ln_eps");
  try {
    pc.validate();
  } catch (const Error& e) {
    fail(Errc::format, std::string("checkpoint: ") + e.what());
  }

  Checkpoint ckpt;
  TrainConfig& tc = ckpt.train;
  tc.lr = get<double>(cfg, "train", "lr");
  tc.batch_size = get<std::size_t>(cfg, "train", "batch_size");
  tc.epochs = get<std::size_t>(cfg, "train", "epochs");
  tc.temperature = get<double>(cfg, "train", "temperature");
  tc.train_fraction = get<double>(cfg, "train", "train_fraction");
  tc.seed = get<std::uint64_t>(cfg, "train", "seed");
  tc.beta1 = get<double>(cfg, "train", "beta1");
  tc.beta2 = get<double>(cfg, "train", "beta2");
  tc.adam_eps = get<double>(cfg, "train", "adam_eps");
  tc.min_len = get<std::size_t>(cfg, "train", "min_len");
  tc.max_len = get<std::size_t>(cfg, "train", "max_len");

  ckpt.params = PoolerParams<float>::zeros(pc);
  auto tensors = ckpt.params.tensors();
  const std::uint32_t count = r.u32();
  if (count != tensors.size())
    fail(Errc::format, "checkpoint: tensor count " + std::to_string(count) + ", expected " +
                           std::to_string(tensors.size()));
  for (auto& t : tensors) {
    const std::string name = r.str(r.u16());
    if (name != t.name)
      fail(Errc::format, "checkpoint: tensor '" + name + "' where '" + std::string(t.name) + "' was expected");
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = r.u32();
    if (dims != t.dims) fail(Errc::format, "checkpoint: tensor '" + name + "' has dims inconsistent with config");
    r.f32s(t.values);
  }
  if (r.remaining() != 0)
    fail(Errc::format, "checkpoint: " + std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  bin::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(bin::read_file(path));
}

std::string checkpoint_id(const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  const std::uint64_t h =
      fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace uflow
