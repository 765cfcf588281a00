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

#ifndef RDAL_PRIVACY_EVAL_HPP_
#define RDAL_PRIVACY_EVAL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rdal/corpus.hpp"
#include "rdal/metrics.hpp"
#include "rdal/training.hpp"

namespace rdal {

// Frozen 64-d latents for every manifest example, grouped train, val, test;
// manifest order within each split.
struct LatentDataset {
  nn::Tensor<float> z;  // (n, kLatentDim)
  std::vector<int> id;
  std::vector<int> label;           // 0-based event class
  std::vector<std::uint8_t> speech;
  std::vector<std::int8_t> gender;  // -1 none, 0 male, 1 female
  std::vector<Split> split;

  std::size_t size() const { return id.size(); }
};

// Feature extractor and event classifier rebuilt from a training checkpoint.
struct LoadedModel {
  Method method = Method::kBaseline;
  int num_classes = 0;
  std::array<int, 4> conv_widths{};
  std::string frontend_tag;
  std::unique_ptr<nn::Sequential<float>> f;
  std::unique_ptr<nn::Sequential<float>> c;
};

LoadedModel load_model(const std::filesystem::path& checkpoint_path);

// Forward-only pass over the whole manifest; never touches the extractor's
// parameters. Repeat calls produce bit-identical latents.
LatentDataset extract_latent_dataset(nn::Module<float>* f,
                                     const CorpusManifest& manifest,
                                     const FrontendConfig& frontend,
                                     MaskNet<float>* mask = nullptr,
                                     const FeatureCache* cache = nullptr);

// Text export of a latent dataset; floats are printed with enough digits to
// round-trip exactly.
void write_latents_tsv(const std::filesystem::path& path,
                       const LatentDataset& data);
LatentDataset load_latents_tsv(const std::filesystem::path& path);

enum class AttackTarget { kSpeech, kGender };

struct AttackerConfig {
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int patience = 10;
  int max_epochs = 200;
};

// Trains a fresh speech-classifier-shaped attacker on the train-split
// latents, model-selected on the validation split. The gender target uses
// only speech-bearing examples. Throws DegenerateInputError when a needed
// subset collapses to one class.
ProbeResult train_attacker(const LatentDataset& data, AttackTarget target,
                           const AttackerConfig& config, std::uint64_t seed);

// One evaluation run: attack-resistance metrics on the test split. All
// values lie in [0, 1].
struct MetricsRecord {
  double sed_accuracy = 0.0;
  double sad_accuracy = 0.0;
  double sad_auc = 0.0;
  double sad_density_overlap = 0.0;
  double gd_accuracy = 0.0;
  double gd_auc = 0.0;
  std::uint64_t run_seed = 0;
};

struct AggregateStat {
  double mean = 0.0;
  double stdev = 0.0;
};

struct AggregateReport {
  int runs = 0;
  AggregateStat sed_accuracy, sad_accuracy, sad_auc, sad_density_overlap,
      gd_accuracy, gd_auc;
};

AggregateReport aggregate_runs(const std::vector<MetricsRecord>& runs);

struct EvalConfig {
  int runs = 10;
  std::uint64_t seed = 7;  // run r draws its attacker seed from this
  AttackerConfig attacker;
  // Required when the checkpoint was trained with masking.
  std::filesystem::path mask_checkpoint;
  const FeatureCache* cache = nullptr;

  void validate() const;
};

struct EvaluationResult {
  std::vector<MetricsRecord> runs;
  AggregateReport aggregate;
  LatentDataset latents;
};

// Loads the checkpoint, extracts latents once, then trains `runs` attacker
// pairs (speech and gender) that differ only in their seed. The event
// classifier from the checkpoint scores SED accuracy; it is identical across
// runs.
EvaluationResult evaluate(const std::filesystem::path& checkpoint_path,
                          const CorpusManifest& manifest,
                          const EvalConfig& config);

// Per-run metrics as a TSV with a header row.
void write_metrics_tsv(const std::filesystem::path& path,
                       const std::vector<MetricsRecord>& runs);
std::vector<MetricsRecord> load_metrics_tsv(const std::filesystem::path& path);

// Human-readable summary table: one row per metric, mean and spread.
std::string format_report(const std::string& title,
                          const AggregateReport& report);

// Plot data emitters, all delimited text with a header row.
void write_roc_tsv(const std::filesystem::path& path,
                   const std::vector<RocPoint>& curve);
void write_density_tsv(const std::filesystem::path& path,
                       const DensityCurve& pos, const DensityCurve& neg);
void write_projection_tsv(const std::filesystem::path& path,
                          const std::vector<std::array<double, 2>>& points,
                          const LatentDataset& data);

}  // namespace rdal

#endif  // RDAL_PRIVACY_EVAL_HPP_
