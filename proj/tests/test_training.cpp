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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rdal/training.hpp"

using namespace rdal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Random features with an optional class stripe and speech stripe so the
// classifier and probe have something to find.
SplitData synth_split(int n, int classes, int rows, int cols,
                      std::uint64_t seed, bool speech_signal,
                      bool class_signal = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  SplitData d;
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    const bool speech = (i % 2) == 0;
    FeatureMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values.resize(std::size_t(rows) * cols);
    for (auto& v : m.values) v = noise(rng);
    if (class_signal)
      for (int c = 0; c < cols; ++c) m.at(label % rows, c) += 2.5f;
    if (speech_signal && speech)
      for (int c = 0; c < cols; ++c) m.at(rows - 1, c) += 3.0f;
    d.x.push_back(std::move(m));
    d.label.push_back(label);
    d.speech.push_back(speech ? 1 : 0);
    d.gender.push_back(speech ? std::int8_t(i % 2) : std::int8_t(-1));
  }
  return d;
}

TrainConfig tiny_config(Method method, std::uint64_t seed = 7) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.num_classes = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  cfg.warmup_epochs = 2;
  cfg.max_epochs = 6;
  cfg.tau = 2;
  cfg.patience = 10;
  cfg.probe_patience = 5;
  cfg.probe_max_epochs = 40;
  cfg.conv_widths = {2, 2, 2, 2};
  cfg.seed = seed;
  return cfg;
}

std::vector<float> flat_params(nn::Module<float>* m, const char* prefix) {
  std::vector<float> out;
  for (const auto& p : nn::collect_params(m, prefix))
    out.insert(out.end(), p.value->begin(), p.value->end());
  return out;
}

nn::Tensor<float> labeled_latents(int n, float separation,
                                  std::vector<float>* targets,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  nn::Tensor<float> z = nn::Tensor<float>::vec(n, kLatentDim);
  targets->clear();
  for (int i = 0; i < n; ++i) {
    const bool pos = (i % 2) == 0;
    targets->push_back(pos ? 1.0f : 0.0f);
    for (int k = 0; k < kLatentDim; ++k)
      z.data[std::size_t(i) * kLatentDim + k] = noise(rng);
    z.data[std::size_t(i) * kLatentDim] += pos ? separation : -separation;
  }
  return z;
}

}  // namespace

TEST_CASE("method names round trip") {
  for (Method m : {Method::kBaseline, Method::kNaiveAdv, Method::kRdal,
                   Method::kRdalM})
    CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("unknown"), ConfigError);
}

TEST_CASE("config validation rejects malformed settings") {
  TrainConfig cfg = tiny_config(Method::kRdal);
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(Method::kRdal);
  cfg.tau = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config(Method::kRdalM);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);  // missing mask checkpoint
  cfg.mask_checkpoint = "mask.ckpt";
  CHECK_NOTHROW(cfg.validate());
  cfg = tiny_config(Method::kRdal);
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("every batch carries exactly half speech examples") {
  SplitData d = synth_split(40, 2, 4, 5, 101, true);
  BalancedBatcher batcher(d, 8);
  CHECK(batcher.batches_per_epoch() == 5);
  std::mt19937_64 rng(1);
  auto batches = batcher.epoch_batches(&rng);
  REQUIRE(int(batches.size()) == 5);
  for (const auto& idx : batches) {
    REQUIRE(idx.size() == 8);
    int speech = 0;
    for (int i : idx) speech += d.speech[i];
    CHECK(speech == 4);
    Batch b = batcher.gather(d, idx);
    int in_batch = 0;
    for (float s : b.speech) in_batch += int(s);
    CHECK(in_batch == 4);
  }
}

TEST_CASE("partial batches are dropped") {
  SplitData d = synth_split(38, 2, 4, 5, 102, true);  // 19 speech, 19 clean
  BalancedBatcher batcher(d, 8);
  CHECK(batcher.batches_per_epoch() == 4);  // 3 of each pool left over
  std::mt19937_64 rng(2);
  CHECK(batcher.epoch_batches(&rng).size() == 4);
}

TEST_CASE("batch plans are deterministic and vary across epochs") {
  SplitData d = synth_split(24, 2, 4, 5, 103, true);
  BalancedBatcher batcher(d, 8);
  std::mt19937_64 a(5), b(5), c(6);
  auto pa = batcher.epoch_batches(&a);
  auto pb = batcher.epoch_batches(&b);
  auto pc = batcher.epoch_batches(&c);
  CHECK(pa == pb);
  CHECK(pa != pc);
}

TEST_CASE("train step updates all three parameter sets") {
  SplitData train = synth_split(32, 2, 8, 9, 104, true);
  SplitData val = synth_split(16, 2, 8, 9, 105, true);
  Trainer t(tiny_config(Method::kRdal), train, val);
  const auto f0 = flat_params(t.feature_extractor(), "F");
  const auto c0 = flat_params(t.event_classifier(), "C");
  const auto d0 = flat_params(t.speech_classifier(), "D");

  BalancedBatcher batcher(train, 8);
  std::mt19937_64 rng(3);
  auto batches = batcher.epoch_batches(&rng);
  const LossBundle l = t.train_step(batcher.gather(train, batches[0]), 0.5);
  CHECK(std::isfinite(l.loss_cls));
  CHECK(std::isfinite(l.loss_adv));
  CHECK(l.loss_cls > 0.0);
  CHECK(l.loss_adv > 0.0);
  CHECK(flat_params(t.feature_extractor(), "F") != f0);
  CHECK(flat_params(t.event_classifier(), "C") != c0);
  CHECK(flat_params(t.speech_classifier(), "D") != d0);
}

TEST_CASE("baseline has no speech classifier path") {
  SplitData train = synth_split(32, 2, 8, 9, 106, true);
  SplitData val = synth_split(16, 2, 8, 9, 107, true);
  Trainer t(tiny_config(Method::kBaseline), train, val);
  CHECK(t.speech_classifier() == nullptr);
  BalancedBatcher batcher(train, 8);
  std::mt19937_64 rng(4);
  auto batches = batcher.epoch_batches(&rng);
  const LossBundle l = t.train_step(batcher.gather(train, batches[0]), 0.0);
  CHECK(l.loss_adv == 0.0);
  CHECK(l.loss_cls > 0.0);
}

TEST_CASE("methods nest: lambda zero and no probes reproduce the baseline") {
  // With the ramp held at zero and probe cycles beyond the horizon, the
  // adversarial branch must not perturb F or C in any way.
  SplitData train = synth_split(32, 2, 8, 9, 108, true);
  SplitData val = synth_split(16, 2, 8, 9, 109, true);
  TrainConfig cfg = tiny_config(Method::kBaseline, 21);
  cfg.warmup_epochs = 100;  // lambda stays zero for the whole run
  cfg.tau = 1000;           // no cycles fire
  cfg.max_epochs = 3;

  const fs::path dir = temp_dir("rdal_nesting");
  Trainer base(cfg, train, val);
  base.fit(dir / "baseline");

  cfg.method = Method::kNaiveAdv;
  Trainer naive(cfg, train, val);
  naive.fit(dir / "naive");

  cfg.method = Method::kRdal;
  Trainer rdal_t(cfg, train, val);
  rdal_t.fit(dir / "rdal");

  const auto fb = flat_params(base.feature_extractor(), "F");
  const auto fn = flat_params(naive.feature_extractor(), "F");
  const auto fr = flat_params(rdal_t.feature_extractor(), "F");
  CHECK(fb == fn);
  CHECK(fb == fr);
  CHECK(flat_params(base.event_classifier(), "C") ==
        flat_params(naive.event_classifier(), "C"));
  CHECK(flat_params(base.event_classifier(), "C") ==
        flat_params(rdal_t.event_classifier(), "C"));
}

TEST_CASE("a positive lambda changes the extractor trajectory") {
  SplitData train = synth_split(32, 2, 8, 9, 110, true);
  SplitData val = synth_split(16, 2, 8, 9, 111, true);
  TrainConfig cfg = tiny_config(Method::kRdal, 22);
  Trainer a(cfg, train, val);
  Trainer b(cfg, train, val);
  BalancedBatcher batcher(train, 8);
  std::mt19937_64 rng(5);
  auto batches = batcher.epoch_batches(&rng);
  Batch batch = batcher.gather(train, batches[0]);
  a.train_step(batch, 0.0);
  b.train_step(batch, 1.0);
  CHECK(flat_params(a.feature_extractor(), "F") !=
        flat_params(b.feature_extractor(), "F"));
  // The speech classifier update itself is lambda-free.
  CHECK(flat_params(a.speech_classifier(), "D") ==
        flat_params(b.speech_classifier(), "D"));
}

TEST_CASE("probe swap copies parameters exactly and is idempotent") {
  SplitData train = synth_split(32, 2, 8, 9, 112, true);
  SplitData val = synth_split(16, 2, 8, 9, 113, true);
  Trainer t(tiny_config(Method::kRdal, 23), train, val);

  BalancedBatcher batcher(train, 8);
  std::mt19937_64 rng(6);
  auto batches = batcher.epoch_batches(&rng);
  t.train_step(batcher.gather(train, batches[0]), 0.5);  // momentum builds

  std::mt19937_64 probe_rng(77);
  auto probe = build_speech_classifier<float>(&probe_rng);
  const auto f_before = flat_params(t.feature_extractor(), "F");
  const auto c_before = flat_params(t.event_classifier(), "C");

  t.swap_probe(*probe);
  CHECK(flat_params(t.speech_classifier(), "D") ==
        flat_params(probe.get(), "D"));
  CHECK(flat_params(t.feature_extractor(), "F") == f_before);
  CHECK(flat_params(t.event_classifier(), "C") == c_before);

  t.swap_probe(*probe);
  CHECK(flat_params(t.speech_classifier(), "D") ==
        flat_params(probe.get(), "D"));

  // Momentum velocities for D are dropped with the swap.
  Checkpoint snap = t.snapshot(0, 0.0);
  for (const auto& [name, values] : snap.tensors) {
    if (name.rfind("opt.D", 0) != 0) continue;
    for (float v : values) CHECK(v == 0.0f);
  }
}

TEST_CASE("probe training stays near chance on speech-blind latents") {
  std::vector<float> train_t, val_t;
  nn::Tensor<float> train_z = labeled_latents(256, 0.0f, &train_t, 301);
  nn::Tensor<float> val_z = labeled_latents(256, 0.0f, &val_t, 302);
  TrainConfig cfg = tiny_config(Method::kRdal);
  cfg.probe_max_epochs = 200;
  cfg.probe_patience = 10;
  ProbeResult r = train_binary_probe(train_z, train_t, val_z, val_t, cfg,
                                     mix_seed(7, "probe-test", 1));
  CHECK(std::abs(r.val_accuracy - 0.5) <= 0.05);
  CHECK(r.val_loss > 0.6);  // near ln 2
  CHECK(r.val_loss < 0.8);
}

TEST_CASE("probe training separates separable latents") {
  std::vector<float> train_t, val_t;
  nn::Tensor<float> train_z = labeled_latents(256, 2.0f, &train_t, 303);
  nn::Tensor<float> val_z = labeled_latents(256, 2.0f, &val_t, 304);
  TrainConfig cfg = tiny_config(Method::kRdal);
  cfg.probe_max_epochs = 200;
  cfg.probe_patience = 10;
  ProbeResult r = train_binary_probe(train_z, train_t, val_z, val_t, cfg,
                                     mix_seed(7, "probe-test", 2));
  CHECK(r.val_accuracy >= 0.9);
  CHECK(r.val_loss < 0.4);
}

TEST_CASE("probe training requires both target values") {
  std::vector<float> train_t, val_t;
  nn::Tensor<float> train_z = labeled_latents(32, 0.0f, &train_t, 305);
  nn::Tensor<float> val_z = labeled_latents(16, 0.0f, &val_t, 306);
  std::fill(train_t.begin(), train_t.end(), 1.0f);
  TrainConfig cfg = tiny_config(Method::kRdal);
  CHECK_THROWS_AS(
      train_binary_probe(train_z, train_t, val_z, val_t, cfg, 1), Error);
}

TEST_CASE("probe training is deterministic") {
  std::vector<float> train_t, val_t;
  nn::Tensor<float> train_z = labeled_latents(64, 1.0f, &train_t, 307);
  nn::Tensor<float> val_z = labeled_latents(64, 1.0f, &val_t, 308);
  TrainConfig cfg = tiny_config(Method::kRdal);
  ProbeResult a = train_binary_probe(train_z, train_t, val_z, val_t, cfg, 9);
  ProbeResult b = train_binary_probe(train_z, train_t, val_z, val_t, cfg, 9);
  CHECK(a.val_loss == b.val_loss);
  CHECK(a.epochs == b.epochs);
  CHECK(flat_params(a.net.get(), "D") == flat_params(b.net.get(), "D"));
}

TEST_CASE("latent extraction is batch-size invariant") {
  SplitData d = synth_split(21, 2, 8, 9, 114, true);
  std::mt19937_64 rng(8);
  auto f = build_feature_extractor<float>({2, 2, 2, 2}, &rng);
  nn::Tensor<float> a = extract_latents(f.get(), d, 64);
  nn::Tensor<float> b = extract_latents(f.get(), d, 7);
  CHECK(a.n == 21);
  CHECK(a.c == kLatentDim);
  CHECK(a.data == b.data);
}

TEST_CASE("fit runs probe cycles and writes the training artifacts") {
  SplitData train = synth_split(48, 2, 8, 9, 115, true);
  SplitData val = synth_split(24, 2, 8, 9, 116, true);
  TrainConfig cfg = tiny_config(Method::kRdal, 24);
  const fs::path dir = temp_dir("rdal_fit_artifacts");
  Trainer t(cfg, train, val);
  FitResult r = t.fit(dir);

  CHECK(r.epochs_run == 6);
  CHECK((r.best_epoch == 2 || r.best_epoch == 4 || r.best_epoch == 6));
  CHECK(fs::exists(dir / "cycle_2.ckpt"));
  CHECK(fs::exists(dir / "cycle_4.ckpt"));
  CHECK(fs::exists(dir / "cycle_6.ckpt"));
  CHECK(fs::exists(r.best_checkpoint));
  Checkpoint best = load_checkpoint(r.best_checkpoint);
  CHECK(best.meta.at("method") == "rdal");
  CHECK(best.meta.at("epoch") == std::to_string(r.best_epoch));

  std::ifstream log(r.log_path);
  REQUIRE(bool(log));
  std::string line;
  std::getline(log, line);
  CHECK(line ==
        "epoch\tlambda\tloss_cls\tloss_adv\tval_loss_cls\tprobe_val_lsp"
        "\tprobe_val_acc\td_val_acc");
  int rows = 0, probe_rows = 0;
  while (std::getline(log, line)) {
    ++rows;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    REQUIRE(fields.size() >= 4);
    if (fields.size() >= 6 && !fields[5].empty()) ++probe_rows;
  }
  CHECK(rows == 6);
  CHECK(probe_rows == 3);  // epochs 2, 4, 6
}

TEST_CASE("baseline fit tracks validation classification loss at cycles") {
  SplitData train = synth_split(48, 2, 8, 9, 117, true);
  SplitData val = synth_split(24, 2, 8, 9, 118, true);
  TrainConfig cfg = tiny_config(Method::kBaseline, 25);
  cfg.max_epochs = 4;
  const fs::path dir = temp_dir("rdal_fit_baseline");
  Trainer t(cfg, train, val);
  FitResult r = t.fit(dir);
  CHECK(r.epochs_run == 4);
  CHECK(std::isfinite(r.best_score));
  CHECK(fs::exists(r.best_checkpoint));

  std::ifstream log(r.log_path);
  std::string line;
  std::getline(log, line);
  int val_rows = 0;
  while (std::getline(log, line)) {
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() >= 5 && !fields[4].empty()) ++val_rows;
  }
  CHECK(val_rows == 2);  // epochs 2 and 4
}

TEST_CASE("naive_adv fit logs in-loop speech classifier accuracy at cycles") {
  SplitData train = synth_split(48, 2, 8, 9, 123, true);
  SplitData val = synth_split(24, 2, 8, 9, 124, true);
  TrainConfig cfg = tiny_config(Method::kNaiveAdv, 28);
  cfg.max_epochs = 4;
  const fs::path dir = temp_dir("rdal_fit_naive_log");
  Trainer t(cfg, train, val);
  FitResult r = t.fit(dir);

  std::ifstream log(r.log_path);
  std::string line;
  std::getline(log, line);
  int d_rows = 0, probe_rows = 0;
  while (std::getline(log, line)) {
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() >= 6 && !fields[5].empty()) ++probe_rows;
    if (fields.size() >= 8 && !fields[7].empty()) {
      ++d_rows;
      const double acc = std::stod(fields[7]);
      CHECK(acc >= 0.0);
      CHECK(acc <= 1.0);
    }
  }
  CHECK(d_rows == 2);      // epochs 2 and 4
  CHECK(probe_rows == 0);  // no probe cycles without resets
}

TEST_CASE("rdal fit stops early when the probe loss stops improving") {
  // Static, separable latents: the retrained probe converges to roughly the
  // same validation loss every cycle, so strict improvements dry up.
  SplitData train = synth_split(48, 2, 8, 9, 119, true);
  SplitData val = synth_split(24, 2, 8, 9, 120, true);
  TrainConfig cfg = tiny_config(Method::kRdal, 26);
  cfg.warmup_epochs = 1000;
  cfg.tau = 1;
  cfg.patience = 3;
  cfg.max_epochs = 50;
  cfg.probe_max_epochs = 20;
  const fs::path dir = temp_dir("rdal_fit_earlystop");
  Trainer t(cfg, train, val);
  FitResult r = t.fit(dir);
  CHECK(r.epochs_run < 50);
  CHECK(r.best_epoch <= r.epochs_run);
}

TEST_CASE("fit is bit-for-bit reproducible") {
  SplitData train = synth_split(48, 2, 8, 9, 121, true);
  SplitData val = synth_split(24, 2, 8, 9, 122, true);
  TrainConfig cfg = tiny_config(Method::kRdal, 27);
  cfg.max_epochs = 4;
  const fs::path dir = temp_dir("rdal_fit_repro");

  Trainer a(cfg, train, val);
  FitResult ra = a.fit(dir / "a");
  Trainer b(cfg, train, val);
  FitResult rb = b.fit(dir / "b");

  CHECK(flat_params(a.feature_extractor(), "F") ==
        flat_params(b.feature_extractor(), "F"));
  CHECK(ra.best_score == rb.best_score);

  std::ifstream la(ra.log_path), lb(rb.log_path);
  std::stringstream sa, sb;
  sa << la.rdbuf();
  sb << lb.rdbuf();
  CHECK(sa.str() == sb.str());

  Checkpoint ca = load_checkpoint(ra.best_checkpoint);
  Checkpoint cb = load_checkpoint(rb.best_checkpoint);
  CHECK(ca.tensors == cb.tensors);
}

TEST_CASE("non-finite inputs abort training with a diagnostic") {
  SplitData train = synth_split(32, 2, 8, 9, 123, true);
  SplitData val = synth_split(16, 2, 8, 9, 124, true);
  train.x[3].values[10] = std::numeric_limits<float>::quiet_NaN();
  TrainConfig cfg = tiny_config(Method::kRdal, 28);
  const fs::path dir = temp_dir("rdal_fit_nan");
  Trainer t(cfg, train, val);
  CHECK_THROWS_AS(t.fit(dir), Error);
}

TEST_CASE("trainer rejects a batch size larger than the balanced split") {
  SplitData train = synth_split(8, 2, 8, 9, 125, true);
  SplitData val = synth_split(8, 2, 8, 9, 126, true);
  TrainConfig cfg = tiny_config(Method::kRdal);
  cfg.batch_size = 32;
  CHECK_THROWS_AS(Trainer(cfg, train, val), ConfigError);
}
