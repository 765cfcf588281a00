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

#ifndef RDAL_CORPUS_HPP_
#define RDAL_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rdal/audio.hpp"
#include "rdal/synth.hpp"

namespace rdal {

enum class Split { kTrain, kValidation, kTest };
constexpr std::array<Split, 3> kAllSplits = {Split::kTrain, Split::kValidation,
                                             Split::kTest};
const char* split_name(Split s);
Split parse_split(const std::string& name);

struct MixtureExample {
  int id = 0;
  std::string mixture_path;            // relative to the manifest directory
  std::string event_path;              // event-only target; empty if unavailable
  int event_class = 0;                 // 1..Y
  bool has_speech = false;
  std::optional<Gender> speaker_gender;  // present iff has_speech
  Split split = Split::kTrain;
};

struct CorpusManifest {
  std::vector<MixtureExample> examples;
  int num_classes = 0;
  std::filesystem::path root;  // directory the paths are relative to

  int count(Split s) const;
  int count(Split s, int event_class) const;
  int speech_count(Split s) const;
  int speech_count(Split s, int event_class) const;
  int speech_gender_count(int event_class, Gender g) const;
  bool has_event_targets() const;  // every example carries an event-only path
};

// Throws Error when a manifest invariant is broken: per class and split the
// speech share must be half (+/-1), gender present iff speech, gender
// balanced per class (+/-1), and the development pool split roughly 9:1.
void validate_manifest(const CorpusManifest& manifest);

// -- Planning ---------------------------------------------------------------

struct ClassSplitCounts {
  int train = 0;
  int validation = 0;
  int test = 0;
  int total() const { return train + validation + test; }
};

struct PlannedExample {
  int event_class;
  Split split;
  bool has_speech;
  std::optional<Gender> gender;
};

// Expands per-class split sizes into example slots under the balance rules:
// per class, floor(total/2) mixtures carry speech; each split holds
// floor(n/2) of them with the per-class remainder going to the first
// odd-sized split in (train, validation, test) order; genders alternate
// within a class so the per-class counts differ by at most one.
std::vector<PlannedExample> plan_corpus(
    const std::vector<ClassSplitCounts>& counts);

// Splits `total` segments of one class into train/validation/test using the
// test fraction and then the validation share of the development pool.
ClassSplitCounts split_counts(int total, double test_fraction,
                              double val_fraction);

// -- Synthetic mode ----------------------------------------------------------

struct SynthCorpusConfig {
  int num_classes = 4;
  int segments_per_class = 150;
  double test_fraction = 0.15;
  double val_fraction = 0.10;
  // When set, overrides the per-class sizing above (one entry per class).
  std::vector<ClassSplitCounts> explicit_counts;
  std::uint64_t seed = 7;
};

// Generates mixtures and writes `out_dir/manifest.tsv` plus float32 WAV
// segment files under `out_dir/audio/`. Bit-reproducible for a fixed seed.
CorpusManifest build_synthetic_corpus(const SynthCorpusConfig& config,
                                      const std::filesystem::path& out_dir);

// -- Real-corpus mode ---------------------------------------------------------

// Ingests 44.1 kHz mono PCM16 recordings. Event recordings live in
// per-class subdirectories of `event_dir` (optionally split into dev/ and
// eval/ subdirectories); speech recordings live under `speech_dir` with a
// sidecar TSV (file, speaker, gender, pool) where pool is dev or test.
struct RealCorpusConfig {
  std::filesystem::path event_dir;
  std::filesystem::path speech_dir;
  std::filesystem::path speech_metadata;
  int segments_per_recording = 2;
  double test_fraction = 0.15;  // used when class dirs lack dev/eval
  double val_fraction = 0.10;
  std::uint64_t seed = 7;
};

CorpusManifest build_real_corpus(const RealCorpusConfig& config,
                                 const std::filesystem::path& out_dir);

// -- Manifest IO --------------------------------------------------------------

void save_manifest(const CorpusManifest& manifest,
                   const std::filesystem::path& path);
CorpusManifest load_manifest(const std::filesystem::path& path);

// Loads a segment WAV referenced by the manifest.
AudioSegment load_segment(const CorpusManifest& manifest,
                          const std::string& relative_path);

}  // namespace rdal

#endif  // RDAL_CORPUS_HPP_
