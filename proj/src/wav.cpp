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

#include "rdal/wav.hpp"

#include <cstring>
#include <fstream>

#include "rdal/common.hpp"

namespace rdal {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(buf[i]) << (8 * i);
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = (v >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

void write_header(std::ostream& out, std::uint16_t format, int sample_rate,
                  std::uint16_t bits, std::uint32_t data_bytes) {
  const std::uint16_t channels = 1;
  const std::uint32_t byte_rate = std::uint32_t(sample_rate) * channels * bits / 8;
  const std::uint16_t block_align = channels * bits / 8;
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format);
  write_le<std::uint16_t>(out, channels);
  write_le<std::uint32_t>(out, std::uint32_t(sample_rate));
  write_le<std::uint32_t>(out, byte_rate);
  write_le<std::uint16_t>(out, block_align);
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw IoError("not a RIFF file: " + path.string());
  read_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw IoError("not a WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  bool have_fmt = false;
  WavData wav;

  while (in) {
    in.read(tag, 4);
    if (!in) break;
    const std::uint32_t chunk_size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      sample_rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav data chunk before fmt: " + path.string());
      if (channels != 1)
        throw IoError("expected mono wav, got " + std::to_string(channels) +
                      " channels: " + path.string());
      if (format == kFormatPcm && bits == 16) {
        const std::size_t n = chunk_size / 2;
        wav.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto raw = static_cast<std::int16_t>(read_le<std::uint16_t>(in));
          wav.samples[i] = float(raw) / 32768.0f;
        }
      } else if (format == kFormatFloat && bits == 32) {
        const std::size_t n = chunk_size / 4;
        wav.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::uint32_t raw = read_le<std::uint32_t>(in);
          float f;
          std::memcpy(&f, &raw, 4);
          wav.samples[i] = f;
        }
      } else {
        throw IoError("unsupported wav encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bit): " + path.string());
      }
      wav.sample_rate = int(sample_rate);
      return wav;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw IoError("wav file has no data chunk: " + path.string());
}

void write_wav_float32(const std::filesystem::path& path,
                       const std::vector<float>& samples, int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav file: " + path.string());
  write_header(out, kFormatFloat, sample_rate, 32,
               std::uint32_t(samples.size() * 4));
  for (float f : samples) {
    std::uint32_t raw;
    std::memcpy(&raw, &f, 4);
    write_le<std::uint32_t>(out, raw);
  }
  if (!out) throw IoError("short write: " + path.string());
}

void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<float>& samples, int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write wav file: " + path.string());
  write_header(out, kFormatPcm, sample_rate, 16,
               std::uint32_t(samples.size() * 2));
  for (float f : samples) {
    float clipped = f;
    if (clipped > 0.999969f) clipped = 0.999969f;
    if (clipped < -1.0f) clipped = -1.0f;
    write_le<std::uint16_t>(out, std::uint16_t(std::int16_t(clipped * 32768.0f)));
  }
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace rdal
