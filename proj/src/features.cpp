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

#include "rdal/features.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include "rdal/common.hpp"

namespace rdal {
namespace {

// Left pad is one short of half the window so the frame count comes out to
// kNumFrames exactly with the final frame flush against the padded end.
constexpr int kPadLeft = (kStftWindow - 1) / 2;           // 705
constexpr int kPadRight = kStftWindow - kPadLeft;         // 706
constexpr int kPadded = kSegmentSamples + kStftWindow;    // 45511

// Reflect padding without repeating the edge sample.
inline float padded_sample(const std::vector<float>& x, int p) {
  int i = p - kPadLeft;
  if (i < 0) i = -i;
  const int n = int(x.size());
  if (i >= n) i = 2 * (n - 1) - i;
  return x[std::size_t(i)];
}

// FFTW plan creation is not thread safe; execution on caller buffers is.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftPlan {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan plan = nullptr;

  FftPlan() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    in = fftw_alloc_real(kStftWindow);
    out = fftw_alloc_complex(kStftBins);
    plan = fftw_plan_dft_r2c_1d(kStftWindow, in, out, FFTW_ESTIMATE);
  }
  ~FftPlan() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
};

const std::vector<double>& hamming_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kStftWindow);
    for (int n = 0; n < kStftWindow; ++n)
      v[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / kStftWindow);
    return v;
  }();
  return w;
}

constexpr char kFeatureMagic[4] = {'R', 'D', 'F', 'C'};
constexpr std::uint32_t kFeatureVersion = 1;

// Triangles are contiguous in bin index; skipping their zero tails makes the
// projection cheap without changing results.
struct BandRange {
  int lo, hi;  // half-open bin range with nonzero weight
};

const std::vector<BandRange>& band_ranges(const std::vector<double>& bank) {
  static const std::vector<BandRange> ranges = [&] {
    std::vector<BandRange> r(kMelBands);
    for (int m = 0; m < kMelBands; ++m) {
      int lo = kStftBins, hi = 0;
      for (int b = 0; b < kStftBins; ++b) {
        if (bank[std::size_t(m) * kStftBins + b] > 0.0) {
          lo = std::min(lo, b);
          hi = std::max(hi, b + 1);
        }
      }
      r[m] = {std::min(lo, hi), hi};
    }
    return r;
  }();
  return ranges;
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_filterbank() {
  static const std::vector<double> bank = [] {
    const double mel_hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> edges(kMelBands + 2);
    for (int i = 0; i < kMelBands + 2; ++i)
      edges[i] = mel_to_hz(mel_hi * i / (kMelBands + 1));

    std::vector<double> w(std::size_t(kMelBands) * kStftBins, 0.0);
    for (int b = 0; b < kStftBins; ++b) {
      const double f = double(b) * kSampleRate / kStftWindow;
      for (int m = 0; m < kMelBands; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        double v = 0.0;
        if (f >= lo && f <= mid && mid > lo)
          v = (f - lo) / (mid - lo);
        else if (f > mid && f <= hi && hi > mid)
          v = (hi - f) / (hi - mid);
        w[std::size_t(m) * kStftBins + b] = v;
      }
    }
    return w;
  }();
  return bank;
}

MagnitudeSpectrogram stft_magnitude(const AudioSegment& segment) {
  if (!segment.valid_length())
    throw ShapeError("stft_magnitude: segment must hold exactly one second");
  static_assert((kPadded - kStftWindow) / kStftHop + 1 == kNumFrames);

  const std::vector<double>& window = hamming_window();
  FftPlan fft;

  MagnitudeSpectrogram spec;
  spec.rows = kStftBins;
  spec.cols = kNumFrames;
  spec.values.resize(std::size_t(kStftBins) * kNumFrames);
  for (int f = 0; f < kNumFrames; ++f) {
    const int start = f * kStftHop;
    for (int n = 0; n < kStftWindow; ++n)
      fft.in[n] = window[n] * double(padded_sample(segment.samples, start + n));
    fftw_execute(fft.plan);
    for (int b = 0; b < kStftBins; ++b)
      spec.at(b, f) = float(std::hypot(fft.out[b][0], fft.out[b][1]));
  }
  return spec;
}

LogMelFeature log_mel(const MagnitudeSpectrogram& spec,
                      const FrontendConfig& config) {
  if (spec.rows != kStftBins)
    throw ShapeError("log_mel: expected " + std::to_string(kStftBins) +
                     " frequency bins");
  for (float v : spec.values)
    if (v < 0.0f) throw Error("log_mel: negative magnitude");
  static const std::vector<double> bank = mel_filterbank();
  const std::vector<BandRange>& ranges = band_ranges(bank);

  LogMelFeature out;
  out.rows = kMelBands;
  out.cols = spec.cols;
  out.values.resize(std::size_t(kMelBands) * spec.cols);
  for (int t = 0; t < spec.cols; ++t) {
    for (int m = 0; m < kMelBands; ++m) {
      double acc = 0.0;
      const double* w = &bank[std::size_t(m) * kStftBins];
      for (int b = ranges[m].lo; b < ranges[m].hi; ++b) {
        const double mag = spec.at(b, t);
        acc += w[b] * (config.mel_on_magnitude ? mag : mag * mag);
      }
      out.at(m, t) = float(std::log(std::max(acc, kLogFloor)));
    }
  }
  return out;
}

LogMelFeature featurize(const AudioSegment& segment,
                        const FrontendConfig& config) {
  return log_mel(stft_magnitude(segment), config);
}

std::filesystem::path FeatureCache::entry_path(int example_id) const {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_%06d.feat", tag.c_str(), example_id);
  return dir / name;
}

bool FeatureCache::load(int example_id, FeatureMatrix* out) const {
  const std::filesystem::path p = entry_path(example_id);
  if (!std::filesystem::exists(p)) return false;
  *out = load_feature(p);
  return true;
}

void FeatureCache::store(int example_id, const FeatureMatrix& feature) const {
  std::filesystem::create_directories(dir);
  const std::filesystem::path p = entry_path(example_id);
  const std::filesystem::path tmp = p.string() + ".tmp";
  save_feature(tmp, feature);
  std::filesystem::rename(tmp, p);
}

void save_feature(const std::filesystem::path& path, const FeatureMatrix& m) {
  if (m.values.size() != std::size_t(m.rows) * m.cols)
    throw ShapeError("save_feature: value count does not match shape");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kFeatureMagic, 4);
  const std::uint32_t header[3] = {kFeatureVersion, std::uint32_t(m.rows),
                                   std::uint32_t(m.cols)};
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(m.values.data()),
            std::streamsize(m.values.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

FeatureMatrix load_feature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, kFeatureMagic, 4) != 0 ||
      header[0] != kFeatureVersion)
    throw IoError(path.string() + ": not a feature cache file");
  FeatureMatrix m;
  m.rows = int(header[1]);
  m.cols = int(header[2]);
  if (m.rows <= 0 || m.cols <= 0 || m.rows > 1 << 20 || m.cols > 1 << 20)
    throw IoError(path.string() + ": implausible shape");
  m.values.resize(std::size_t(m.rows) * m.cols);
  in.read(reinterpret_cast<char*>(m.values.data()),
          std::streamsize(m.values.size() * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated feature data");
  return m;
}

}  // namespace rdal
