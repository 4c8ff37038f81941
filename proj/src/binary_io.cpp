// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

#include "uflow/binary_io.hpp"

#include <fstream>

#include "uflow/error.hpp"

namespace uflow::bin {

void Reader::need(std::size_t n, std::string_view field) {
  if (remaining() < n)
    fail(Errc::format, what_ + ": truncated reading " + std::string(field) + ": expected " +
                           std::to_string(n) + " bytes, got " + std::to_string(remaining()));
}

void Reader::expect_magic(std::string_view m) {
  need(m.size(), "magic");
  const std::string got(reinterpret_cast<const char*>(data_.data() + pos_), m.size());
  if (got != m) fail(Errc::format, what_ + ": bad magic: expected '" + std::string(m) + "'");
  pos_ += m.size();
}

std::uint16_t Reader::u16() {
  need(2, "u16");
  std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::string Reader::str(std::size_t n) {
  need(n, "string");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

void Reader::f32s(std::span<float> out) {
  const std::size_t n = out.size() * sizeof(float);
  need(n, "float payload");
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), data_.data() + pos_, n);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(data_[pos_ + 4 * i + b]) << (8 * b);
      out[i] = std::bit_cast<float>(v);
    }
  }
  pos_ += n;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open '" + path.string() + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::uint8_t> data(size);
  if (size && !in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size)))
    fail(Errc::io, "failed reading '" + path.string() + "'");
  return data;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) fail(Errc::io, "failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(Errc::io, "cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

}  // namespace uflow::bin
