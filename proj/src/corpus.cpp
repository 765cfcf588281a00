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

#include "rdal/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "rdal/common.hpp"
#include "rdal/wav.hpp"

namespace rdal {
namespace {

namespace fs = std::filesystem;

// Keeps trailing empty fields, which stream-based getline would drop; the
// final column (event path) is legitimately empty for corpora without
// event-only targets.
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string example_basename(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", id);
  return buf;
}

// Sorted regular files with a .wav extension directly under `dir`.
std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<float> load_recording(const fs::path& path) {
  WavData wav = read_wav(path);
  if (wav.sample_rate != kSampleRate)
    throw IoError(path.string() + ": expected " +
                  std::to_string(kSampleRate) + " Hz, got " +
                  std::to_string(wav.sample_rate));
  return std::move(wav.samples);
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  for (Split s : kAllSplits)
    if (name == split_name(s)) return s;
  throw ConfigError("unknown split: " + name);
}

int CorpusManifest::count(Split s) const {
  int n = 0;
  for (const auto& e : examples) n += e.split == s;
  return n;
}

int CorpusManifest::count(Split s, int event_class) const {
  int n = 0;
  for (const auto& e : examples)
    n += e.split == s && e.event_class == event_class;
  return n;
}

int CorpusManifest::speech_count(Split s) const {
  int n = 0;
  for (const auto& e : examples) n += e.split == s && e.has_speech;
  return n;
}

int CorpusManifest::speech_count(Split s, int event_class) const {
  int n = 0;
  for (const auto& e : examples)
    n += e.split == s && e.event_class == event_class && e.has_speech;
  return n;
}

int CorpusManifest::speech_gender_count(int event_class, Gender g) const {
  int n = 0;
  for (const auto& e : examples)
    n += e.event_class == event_class && e.has_speech &&
         e.speaker_gender == g;
  return n;
}

bool CorpusManifest::has_event_targets() const {
  return !examples.empty() &&
         std::all_of(examples.begin(), examples.end(),
                     [](const MixtureExample& e) { return !e.event_path.empty(); });
}

void validate_manifest(const CorpusManifest& manifest) {
  if (manifest.num_classes < 1) throw Error("manifest has no classes");
  if (manifest.examples.empty()) throw Error("manifest has no examples");
  for (const auto& e : manifest.examples) {
    if (e.event_class < 1 || e.event_class > manifest.num_classes)
      throw Error("example " + std::to_string(e.id) + ": class out of range");
    if (e.has_speech != e.speaker_gender.has_value())
      throw Error("example " + std::to_string(e.id) +
                  ": gender must be present exactly when speech is");
    if (e.mixture_path.empty())
      throw Error("example " + std::to_string(e.id) + ": missing mixture path");
  }
  for (int c = 1; c <= manifest.num_classes; ++c) {
    for (Split s : kAllSplits) {
      int n = manifest.count(s, c);
      int sp = manifest.speech_count(s, c);
      if (std::abs(n - 2 * sp) > 1)
        throw Error(std::string("class ") + std::to_string(c) + " " +
                    split_name(s) + ": speech share " + std::to_string(sp) +
                    "/" + std::to_string(n) + " is not half");
    }
    int male = manifest.speech_gender_count(c, Gender::kMale);
    int female = manifest.speech_gender_count(c, Gender::kFemale);
    if (std::abs(male - female) > 1)
      throw Error("class " + std::to_string(c) + ": gender imbalance " +
                  std::to_string(male) + " vs " + std::to_string(female));
    int train = manifest.count(Split::kTrain, c);
    int val = manifest.count(Split::kValidation, c);
    int dev = train + val;
    if (dev >= 20) {
      double ratio = static_cast<double>(val) / dev;
      if (ratio < 0.05 || ratio > 0.20)
        throw Error("class " + std::to_string(c) +
                    ": validation share of development pool is " +
                    std::to_string(ratio));
    }
  }
}

ClassSplitCounts split_counts(int total, double test_fraction,
                              double val_fraction) {
  if (total < 3) throw ConfigError("need at least 3 segments per class");
  if (test_fraction < 0.0 || test_fraction >= 1.0 || val_fraction < 0.0 ||
      val_fraction >= 1.0)
    throw ConfigError("split fractions must lie in [0, 1)");
  ClassSplitCounts c;
  c.test = static_cast<int>(std::llround(total * test_fraction));
  c.test = std::min(c.test, total - 2);
  int dev = total - c.test;
  c.validation = static_cast<int>(std::llround(dev * val_fraction));
  c.validation = std::min(c.validation, dev - 1);
  c.train = dev - c.validation;
  return c;
}

std::vector<PlannedExample> plan_corpus(
    const std::vector<ClassSplitCounts>& counts) {
  std::vector<PlannedExample> plan;
  for (int c = 1; c <= static_cast<int>(counts.size()); ++c) {
    const ClassSplitCounts& n = counts[c - 1];
    const std::array<int, 3> sizes = {n.train, n.validation, n.test};
    std::array<int, 3> speech = {n.train / 2, n.validation / 2, n.test / 2};
    int deficit = n.total() / 2 - (speech[0] + speech[1] + speech[2]);
    for (int s = 0; deficit > 0 && s < 3; ++s) {
      if (sizes[s] % 2 == 1) {
        ++speech[s];
        --deficit;
      }
    }
    // Odd class ids start the alternation on male so the corpus stays
    // globally balanced when per-class speech counts are odd.
    int parity = (c % 2 == 1) ? 0 : 1;
    int assigned = 0;
    for (int s = 0; s < 3; ++s) {
      for (int i = 0; i < sizes[s]; ++i) {
        PlannedExample e;
        e.event_class = c;
        e.split = kAllSplits[s];
        e.has_speech = i < speech[s];
        if (e.has_speech) {
          e.gender = ((assigned + parity) % 2 == 0) ? Gender::kMale
                                                    : Gender::kFemale;
          ++assigned;
        }
        plan.push_back(e);
      }
    }
  }
  return plan;
}

CorpusManifest build_synthetic_corpus(const SynthCorpusConfig& config,
                                      const fs::path& out_dir) {
  if (config.num_classes < 1 || config.num_classes > kMaxSyntheticClasses)
    throw ConfigError("num_classes must lie in 1.." +
                      std::to_string(kMaxSyntheticClasses));
  std::vector<ClassSplitCounts> counts = config.explicit_counts;
  if (counts.empty()) {
    counts.assign(config.num_classes,
                  split_counts(config.segments_per_class, config.test_fraction,
                               config.val_fraction));
  } else if (static_cast<int>(counts.size()) != config.num_classes) {
    throw ConfigError("explicit_counts must have one entry per class");
  }

  std::vector<PlannedExample> plan = plan_corpus(counts);
  fs::create_directories(out_dir / "audio");

  CorpusManifest manifest;
  manifest.num_classes = config.num_classes;
  manifest.root = out_dir;
  manifest.examples.reserve(plan.size());
  for (size_t i = 0; i < plan.size(); ++i) {
    const PlannedExample& p = plan[i];
    AudioSegment event = normalize(generate_synthetic_event(
        p.event_class, mix_seed(config.seed, "corpus-event", i)));
    std::optional<AudioSegment> speech;
    if (p.has_speech) {
      speech = normalize(generate_synthetic_speech(
          *p.gender, mix_seed(config.seed, "corpus-speech", i)));
    }
    AudioSegment mixture = mix(event, speech);

    MixtureExample e;
    e.id = static_cast<int>(i);
    e.event_class = p.event_class;
    e.has_speech = p.has_speech;
    e.speaker_gender = p.gender;
    e.split = p.split;
    e.mixture_path = "audio/" + example_basename(e.id) + "_mix.wav";
    e.event_path = "audio/" + example_basename(e.id) + "_event.wav";
    write_wav_float32(out_dir / e.mixture_path, mixture.samples, kSampleRate);
    write_wav_float32(out_dir / e.event_path, event.samples, kSampleRate);
    manifest.examples.push_back(std::move(e));
  }
  save_manifest(manifest, out_dir / "manifest.tsv");
  validate_manifest(manifest);
  return manifest;
}

namespace {

struct SpeechPoolEntry {
  AudioSegment segment;
  Gender gender;
};

// dev pool feeds train and validation mixtures; test pool feeds test.
struct SpeechPools {
  std::vector<SpeechPoolEntry> dev_male, dev_female, test_male, test_female;

  std::vector<SpeechPoolEntry>& select(Split split, Gender g) {
    bool dev = split != Split::kTest;
    if (g == Gender::kMale) return dev ? dev_male : test_male;
    return dev ? dev_female : test_female;
  }
};

SpeechPools load_speech_pools(const RealCorpusConfig& config,
                              std::mt19937_64& rng) {
  std::ifstream in(config.speech_metadata);
  if (!in) throw IoError("cannot open " + config.speech_metadata.string());
  SpeechPools pools;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 4)
      throw IoError("speech metadata rows need file, speaker, gender, pool");
    Gender g;
    if (f[2] == "male")
      g = Gender::kMale;
    else if (f[2] == "female")
      g = Gender::kFemale;
    else
      throw IoError("unknown gender: " + f[2]);
    if (f[3] != "dev" && f[3] != "test")
      throw IoError("speech pool must be dev or test: " + f[3]);

    std::vector<float> rec = load_recording(config.speech_dir / f[0]);
    std::vector<AudioSegment> segs = extract_energetic_segments(rec, 1);
    if (segs.empty()) continue;
    SpeechPoolEntry entry{std::move(segs[0]), g};
    if (f[3] == "dev")
      (g == Gender::kMale ? pools.dev_male : pools.dev_female)
          .push_back(std::move(entry));
    else
      (g == Gender::kMale ? pools.test_male : pools.test_female)
          .push_back(std::move(entry));
  }
  std::shuffle(pools.dev_male.begin(), pools.dev_male.end(), rng);
  std::shuffle(pools.dev_female.begin(), pools.dev_female.end(), rng);
  std::shuffle(pools.test_male.begin(), pools.test_male.end(), rng);
  std::shuffle(pools.test_female.begin(), pools.test_female.end(), rng);
  return pools;
}

struct ClassSegments {
  // Event segments per split, already normalized one-second windows.
  std::vector<AudioSegment> train, validation, test;
};

}  // namespace

CorpusManifest build_real_corpus(const RealCorpusConfig& config,
                                 const fs::path& out_dir) {
  if (!fs::is_directory(config.event_dir))
    throw IoError("event directory not found: " + config.event_dir.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(config.event_dir))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty())
    throw IoError("no class subdirectories under " +
                  config.event_dir.string());

  std::mt19937_64 rng = make_rng(config.seed, "real-corpus");
  std::vector<ClassSegments> classes;
  for (const fs::path& dir : class_dirs) {
    ClassSegments cs;
    std::vector<AudioSegment> dev_pool, test_pool;
    auto ingest = [&](const fs::path& d, std::vector<AudioSegment>& pool) {
      for (const fs::path& wav : list_wavs(d)) {
        std::vector<float> rec = load_recording(wav);
        for (AudioSegment& s :
             extract_energetic_segments(rec, config.segments_per_recording))
          pool.push_back(std::move(s));
      }
    };
    if (fs::is_directory(dir / "dev") && fs::is_directory(dir / "eval")) {
      ingest(dir / "dev", dev_pool);
      ingest(dir / "eval", test_pool);
    } else {
      // No curated split: hold out whole recordings for test so windows of
      // one recording never straddle the development/test boundary.
      std::vector<fs::path> wavs = list_wavs(dir);
      std::shuffle(wavs.begin(), wavs.end(), rng);
      size_t test_recs = static_cast<size_t>(
          std::llround(wavs.size() * config.test_fraction));
      for (size_t i = 0; i < wavs.size(); ++i) {
        std::vector<float> rec = load_recording(wavs[i]);
        for (AudioSegment& s :
             extract_energetic_segments(rec, config.segments_per_recording))
          (i < test_recs ? test_pool : dev_pool).push_back(std::move(s));
      }
    }
    if (dev_pool.size() < 2 || test_pool.empty())
      throw Error("class " + dir.filename().string() +
                  ": not enough segments to split");
    std::shuffle(dev_pool.begin(), dev_pool.end(), rng);
    size_t val_n = static_cast<size_t>(
        std::llround(dev_pool.size() * config.val_fraction));
    val_n = std::min(val_n, dev_pool.size() - 1);
    cs.validation.assign(std::make_move_iterator(dev_pool.begin()),
                         std::make_move_iterator(dev_pool.begin() + val_n));
    cs.train.assign(std::make_move_iterator(dev_pool.begin() + val_n),
                    std::make_move_iterator(dev_pool.end()));
    cs.test = std::move(test_pool);
    classes.push_back(std::move(cs));
  }

  std::vector<ClassSplitCounts> counts;
  for (const ClassSegments& cs : classes) {
    ClassSplitCounts n;
    n.train = static_cast<int>(cs.train.size());
    n.validation = static_cast<int>(cs.validation.size());
    n.test = static_cast<int>(cs.test.size());
    counts.push_back(n);
  }
  std::vector<PlannedExample> plan = plan_corpus(counts);
  SpeechPools pools = load_speech_pools(config, rng);

  fs::create_directories(out_dir / "audio");
  CorpusManifest manifest;
  manifest.num_classes = static_cast<int>(classes.size());
  manifest.root = out_dir;
  std::map<std::pair<int, int>, int> cursor;  // (class, split) -> next segment
  for (size_t i = 0; i < plan.size(); ++i) {
    const PlannedExample& p = plan[i];
    ClassSegments& cs = classes[p.event_class - 1];
    std::vector<AudioSegment>* pool = &cs.train;
    if (p.split == Split::kValidation) pool = &cs.validation;
    if (p.split == Split::kTest) pool = &cs.test;
    int idx = cursor[{p.event_class, static_cast<int>(p.split)}]++;
    AudioSegment event = std::move((*pool)[idx]);

    std::optional<AudioSegment> speech;
    if (p.has_speech) {
      std::vector<SpeechPoolEntry>& sp = pools.select(p.split, *p.gender);
      if (sp.empty())
        throw Error(std::string("speech pool exhausted for ") +
                    gender_name(*p.gender) + " " + split_name(p.split));
      speech = std::move(sp.back().segment);
      sp.pop_back();
    }
    AudioSegment mixture = mix(event, speech);

    MixtureExample e;
    e.id = static_cast<int>(i);
    e.event_class = p.event_class;
    e.has_speech = p.has_speech;
    e.speaker_gender = p.gender;
    e.split = p.split;
    e.mixture_path = "audio/" + example_basename(e.id) + "_mix.wav";
    e.event_path = "audio/" + example_basename(e.id) + "_event.wav";
    write_wav_float32(out_dir / e.mixture_path, mixture.samples, kSampleRate);
    write_wav_float32(out_dir / e.event_path, event.samples, kSampleRate);
    manifest.examples.push_back(std::move(e));
  }
  save_manifest(manifest, out_dir / "manifest.tsv");
  validate_manifest(manifest);
  return manifest;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# corpus manifest v1\n";
  out << "# classes\t" << manifest.num_classes << "\n";
  out << "id\tsplit\tclass\tspeech\tgender\tmixture\tevent\n";
  for (const auto& e : manifest.examples) {
    out << e.id << '\t' << split_name(e.split) << '\t' << e.event_class
        << '\t' << (e.has_speech ? 1 : 0) << '\t'
        << (e.speaker_gender ? gender_name(*e.speaker_gender) : "-") << '\t'
        << e.mixture_path << '\t' << e.event_path << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

CorpusManifest load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CorpusManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::vector<std::string> f = split_fields(line);
      if (f.size() == 2 && f[0] == "# classes")
        manifest.num_classes = std::stoi(f[1]);
      continue;
    }
    if (!header_seen) {  // column header row
      header_seen = true;
      continue;
    }
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 7) throw IoError("malformed manifest row: " + line);
    MixtureExample e;
    e.id = std::stoi(f[0]);
    e.split = parse_split(f[1]);
    e.event_class = std::stoi(f[2]);
    e.has_speech = f[3] == "1";
    if (f[4] == "male")
      e.speaker_gender = Gender::kMale;
    else if (f[4] == "female")
      e.speaker_gender = Gender::kFemale;
    else if (f[4] != "-")
      throw IoError("unknown gender: " + f[4]);
    e.mixture_path = f[5];
    e.event_path = f[6];
    manifest.examples.push_back(std::move(e));
  }
  if (manifest.num_classes == 0)
    throw IoError(path.string() + ": missing classes header");
  return manifest;
}

AudioSegment load_segment(const CorpusManifest& manifest,
                          const std::string& relative_path) {
  WavData wav = read_wav(manifest.root / relative_path);
  if (wav.sample_rate != kSampleRate)
    throw IoError(relative_path + ": unexpected sample rate");
  return AudioSegment{std::move(wav.samples), wav.sample_rate};
}

}  // namespace rdal
