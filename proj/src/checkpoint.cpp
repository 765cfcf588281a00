// Copyright 2026 The RDAL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "rdal/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "rdal/common.hpp"

namespace rdal {
namespace {

constexpr char kMagic[4] = {'R', 'D', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void append_u32(std::string* buf, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  buf->append(b, 4);
}

void append_u64(std::string* buf, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  buf->append(b, 8);
}

void append_str(std::string* buf, const std::string& s) {
  append_u32(buf, std::uint32_t(s.size()));
  buf->append(s);
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::string buf;
  buf.append(kMagic, 4);
  append_u32(&buf, kVersion);
  append_u32(&buf, std::uint32_t(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    append_str(&buf, k);
    append_str(&buf, v);
  }
  append_u32(&buf, std::uint32_t(ck.tensors.size()));
  for (const auto& [name, values] : ck.tensors) {
    append_str(&buf, name);
    append_u64(&buf, values.size());
    buf.append(reinterpret_cast<const char*>(values.data()),
               values.size() * sizeof(float));
  }
  append_u64(&buf, fnv1a64(buf.data(), buf.size()));

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw IoError(path.string() + ": not a checkpoint file");

  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (stored != fnv1a64(buf.data(), buf.size() - 8))
    throw IoError(path.string() + ": checksum mismatch");

  Reader r{buf, 4};
  if (r.u32() != kVersion)
    throw IoError(path.string() + ": unsupported checkpoint version");
  Checkpoint ck;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.str();
    const std::uint64_t count = r.u64();
    r.need(count * sizeof(float));
    std::vector<float> values(count);
    std::memcpy(values.data(), buf.data() + r.pos, count * sizeof(float));
    r.pos += count * sizeof(float);
    ck.tensors[std::move(name)] = std::move(values);
  }
  return ck;
}

void store_params(const std::vector<nn::NamedParam<float>>& params,
                  Checkpoint* ck) {
  for (const auto& p : params) {
    if (ck->tensors.count(p.name))
      throw Error("store_params: duplicate tensor " + p.name);
    ck->tensors[p.name] = *p.value;
  }
}

void load_params(const Checkpoint& ck,
                 const std::vector<nn::NamedParam<float>>& params) {
  for (const auto& p : params) {
    auto it = ck.tensors.find(p.name);
    if (it == ck.tensors.end())
      throw IoError("checkpoint is missing tensor " + p.name);
    if (it->second.size() != p.value->size())
      throw ShapeError("checkpoint tensor " + p.name + " has wrong size");
    *p.value = it->second;
  }
}

}  // namespace rdal
