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

#ifndef RDAL_TRAINING_HPP_
#define RDAL_TRAINING_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rdal/checkpoint.hpp"
#include "rdal/corpus.hpp"
#include "rdal/features.hpp"
#include "rdal/models.hpp"
#include "rdal/nn/sgd.hpp"
#include "rdal/schedule.hpp"

namespace rdal {

enum class Method { kBaseline, kNaiveAdv, kRdal, kRdalM };
const char* method_name(Method m);
Method parse_method(const std::string& name);

struct TrainConfig {
  Method method = Method::kRdal;
  int num_classes = 4;
  int batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int warmup_epochs = kWarmupEpochs;
  int max_epochs = 5000;
  double gamma = kLambdaGamma;
  int tau = 50;
  int patience = 10;  // probe cycles without improvement before stopping
  int probe_patience = 10;
  int probe_max_epochs = 200;
  bool probe_fresh_init = true;
  std::array<int, 4> conv_widths = kFullConvWidths;
  std::uint64_t seed = 7;
  FrontendConfig frontend;
  // Required for method rdal_m: checkpoint of the pre-trained mask network.
  std::filesystem::path mask_checkpoint;

  void validate() const;
};

// One split, featurized and label-aligned.
struct SplitData {
  std::vector<FeatureMatrix> x;
  std::vector<int> label;           // 0-based event class
  std::vector<std::uint8_t> speech;
  std::vector<std::int8_t> gender;  // -1 none, 0 male, 1 female

  std::size_t size() const { return x.size(); }
};

// Loads and featurizes a split; when `mask` is given the magnitude passes
// through the frozen mask network before the mel projection. `cache`, when
// set, is consulted first and filled on misses.
SplitData prepare_split(const CorpusManifest& manifest, Split split,
                        const FrontendConfig& frontend,
                        MaskNet<float>* mask = nullptr,
                        const FeatureCache* cache = nullptr);

struct Batch {
  nn::Tensor<float> x;       // (B, 1, bands, frames)
  std::vector<int> label;
  std::vector<float> speech;
};

// Epoch batch plan with exactly half speech examples per batch; partial
// batches are dropped. Deterministic given the rng stream.
class BalancedBatcher {
 public:
  BalancedBatcher(const SplitData& data, int batch_size);

  // Index groups for one epoch, reshuffled per call.
  std::vector<std::vector<int>> epoch_batches(std::mt19937_64* rng) const;

  Batch gather(const SplitData& data, const std::vector<int>& idx) const;

  int batches_per_epoch() const;

 private:
  std::vector<int> speech_idx_, nonspeech_idx_;
  int batch_size_;
};

struct LossBundle {
  double loss_cls = 0.0;
  double loss_adv = 0.0;
  double loss_sp = 0.0;
};

// -- Binary probe -----------------------------------------------------------

// Latents for every example, computed in eval mode (running batch-norm
// statistics), shape (n, 64).
nn::Tensor<float> extract_latents(nn::Module<float>* f, const SplitData& data,
                                  int batch_size = 64);

struct ProbeResult {
  std::unique_ptr<nn::Sequential<float>> net;
  double val_loss = 0.0;      // converged validation binary cross entropy
  double val_accuracy = 0.0;  // threshold 0.5
  int epochs = 0;
};

// Trains a speech-classifier-shaped binary head on frozen latents to
// convergence (best validation loss, patience-limited). Used for D^tau and
// for post-hoc attackers.
ProbeResult train_binary_probe(const nn::Tensor<float>& train_z,
                               const std::vector<float>& train_t,
                               const nn::Tensor<float>& val_z,
                               const std::vector<float>& val_t,
                               const TrainConfig& config,
                               std::uint64_t init_seed);

// -- Trainer -----------------------------------------------------------------

struct FitResult {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_score = 0.0;  // probe val L_sp (rdal) or val L_cls (others)
  std::filesystem::path best_checkpoint;
  std::filesystem::path log_path;
};

class Trainer {
 public:
  Trainer(const TrainConfig& config, SplitData train, SplitData val);

  // Full Algorithm-1 loop with probe cycles and early stopping; writes the
  // log and checkpoints under out_dir and leaves the best parameters loaded.
  FitResult fit(const std::filesystem::path& out_dir);

  // One optimization step on one balanced batch (exposed for tests).
  LossBundle train_step(const Batch& batch, double lambda);

  // Trains a fresh probe on the current frozen F (exposed for tests).
  ProbeResult retrain_probe(int cycle_index);

  // theta_D <- theta_{D^tau}; resets D's momentum.
  void swap_probe(const nn::Sequential<float>& probe);

  nn::Sequential<float>* feature_extractor() { return f_.get(); }
  nn::Sequential<float>* event_classifier() { return c_.get(); }
  nn::Sequential<float>* speech_classifier() { return d_.get(); }
  const TrainConfig& config() const { return config_; }

  double validation_loss_cls();
  Checkpoint snapshot(int epoch, double lambda) const;
  void restore(const Checkpoint& ck);

 private:
  bool has_adversary() const { return config_.method != Method::kBaseline; }
  bool has_probe_cycles() const {
    return config_.method == Method::kRdal || config_.method == Method::kRdalM;
  }

  TrainConfig config_;
  SplitData train_, val_;
  BalancedBatcher batcher_;
  std::unique_ptr<nn::Sequential<float>> f_, c_, d_;
  std::unique_ptr<nn::Sgd<float>> opt_f_, opt_c_, opt_d_;
};

// -- Mask pre-training ---------------------------------------------------------

struct MaskTrainConfig {
  int base = 16;
  int batch_size = 4;
  int max_epochs = 40;
  int patience = 5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 7;
};

struct MaskTrainResult {
  double val_mse = 0.0;        // masked mixture vs event-only magnitude
  double unmasked_mse = 0.0;   // mixture vs event-only magnitude baseline
  int epochs = 0;
};

// Trains the mask network on (mixture magnitude, event-only magnitude)
// pairs from the train split with MSE loss, early-stopped on the validation
// split, and writes the frozen network to mask_checkpoint.
MaskTrainResult pretrain_masknet(const CorpusManifest& manifest,
                                 const MaskTrainConfig& config,
                                 const std::filesystem::path& out_path);

// Rebuilds a mask network from a pre-training checkpoint.
std::unique_ptr<MaskNet<float>> load_masknet(
    const std::filesystem::path& path);

}  // namespace rdal

#endif  // RDAL_TRAINING_HPP_
