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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "rdal/harness.hpp"

using namespace rdal;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void check_specs_equal(const ExperimentSpec& a, const ExperimentSpec& b) {
  CHECK(a.corpus_mode == b.corpus_mode);
  CHECK(a.corpus.num_classes == b.corpus.num_classes);
  CHECK(a.corpus.segments_per_class == b.corpus.segments_per_class);
  CHECK(a.corpus.test_fraction == b.corpus.test_fraction);
  CHECK(a.corpus.val_fraction == b.corpus.val_fraction);
  CHECK(a.corpus.seed == b.corpus.seed);
  CHECK(a.corpus_dir == b.corpus_dir);
  CHECK(a.frontend.mel_on_magnitude == b.frontend.mel_on_magnitude);
  CHECK(a.train.num_classes == b.train.num_classes);
  CHECK(a.train.batch_size == b.train.batch_size);
  CHECK(a.train.learning_rate == b.train.learning_rate);
  CHECK(a.train.momentum == b.train.momentum);
  CHECK(a.train.warmup_epochs == b.train.warmup_epochs);
  CHECK(a.train.max_epochs == b.train.max_epochs);
  CHECK(a.train.gamma == b.train.gamma);
  CHECK(a.train.tau == b.train.tau);
  CHECK(a.train.patience == b.train.patience);
  CHECK(a.train.probe_patience == b.train.probe_patience);
  CHECK(a.train.probe_max_epochs == b.train.probe_max_epochs);
  CHECK(a.train.conv_widths == b.train.conv_widths);
  CHECK(a.tau_grid == b.tau_grid);
  CHECK(a.seeds == b.seeds);
  CHECK(a.mask.base == b.mask.base);
  CHECK(a.mask.batch_size == b.mask.batch_size);
  CHECK(a.mask.max_epochs == b.mask.max_epochs);
  CHECK(a.mask.patience == b.mask.patience);
  CHECK(a.mask.learning_rate == b.mask.learning_rate);
  CHECK(a.mask.momentum == b.mask.momentum);
  CHECK(a.mask.seed == b.mask.seed);
  CHECK(a.eval.runs == b.eval.runs);
  CHECK(a.eval.seed == b.eval.seed);
  CHECK(a.eval.attacker.batch_size == b.eval.attacker.batch_size);
  CHECK(a.eval.attacker.learning_rate == b.eval.attacker.learning_rate);
  CHECK(a.eval.attacker.momentum == b.eval.attacker.momentum);
  CHECK(a.eval.attacker.patience == b.eval.attacker.patience);
  CHECK(a.eval.attacker.max_epochs == b.eval.attacker.max_epochs);
  CHECK(a.out_dir == b.out_dir);
}

// Tiny matrix spec over a shared 2-class corpus.
ExperimentSpec tiny_spec(const fs::path& corpus_dir, const fs::path& out_dir) {
  ExperimentSpec s;
  s.corpus.num_classes = 2;
  // 20 per class splits 15/2/3, putting speech in every split.
  s.corpus.segments_per_class = 20;
  s.corpus.seed = 11;
  s.corpus_dir = corpus_dir;
  s.train.num_classes = 2;
  s.train.batch_size = 8;
  s.train.warmup_epochs = 1;
  s.train.max_epochs = 4;
  s.train.tau = 2;
  s.train.probe_patience = 3;
  s.train.probe_max_epochs = 10;
  s.train.conv_widths = {2, 2, 2, 2};
  s.tau_grid = {2};
  s.seeds = {5};
  s.mask.base = 2;
  s.mask.batch_size = 2;
  s.mask.max_epochs = 4;
  s.mask.patience = 2;
  s.eval.runs = 2;
  s.eval.attacker.batch_size = 8;
  s.eval.attacker.max_epochs = 6;
  s.eval.attacker.patience = 2;
  s.out_dir = out_dir;
  return s;
}

const fs::path& shared_corpus_dir() {
  static const fs::path dir = [] {
    const fs::path d = temp_dir("rdal_harness_corpus");
    SynthCorpusConfig cfg;
    cfg.num_classes = 2;
    cfg.segments_per_class = 20;
    cfg.seed = 11;
    build_synthetic_corpus(cfg, d);
    return d;
  }();
  return dir;
}

std::uint64_t file_checksum(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace

TEST_CASE("shipped config files match the built-in presets") {
  check_specs_equal(load_experiment_ini(fs::path(RDAL_CONFIG_DIR) /
                                        "desk.ini"),
                    desk_spec());
  check_specs_equal(load_experiment_ini(fs::path(RDAL_CONFIG_DIR) /
                                        "paper.ini"),
                    paper_spec());
}

TEST_CASE("config parsing tolerates comments and whitespace") {
  const ExperimentSpec spec = parse_experiment_ini(
      "# leading comment\n"
      "[corpus]\n"
      "  classes =  3 \n"
      "; another comment\n"
      "\n"
      "[train]\n"
      "batch_size = 16\n");
  CHECK(spec.corpus.num_classes == 3);
  CHECK(spec.train.num_classes == 3);
  CHECK(spec.train.batch_size == 16);
  CHECK(spec.train.learning_rate == 0.01);
}

TEST_CASE("config schema rejects malformed input") {
  CHECK_THROWS_AS(parse_experiment_ini("[nope]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\nnope = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\ntau = 1\ntau = 2\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\ntau = soon\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\ntau = 5x\n"), ConfigError);
  CHECK_THROWS_AS(
      parse_experiment_ini("[features]\nmel_on_magnitude = yes\n"),
      ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("tau = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train\ntau = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\nbatchsize\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[corpus]\nmode = imagined\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\ntau_grid =\n"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_ini("[train]\nseeds = -3\n"), ConfigError);
}

TEST_CASE("spec validation guards the grid") {
  ExperimentSpec s = desk_spec();
  s.tau_grid.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = desk_spec();
  s.seeds.clear();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = desk_spec();
  s.tau_grid = {0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("cache root honors the environment override") {
  ExperimentSpec s = desk_spec();
  s.out_dir = "runs/x";
  unsetenv("RDAL_CACHE_DIR");
  CHECK(cache_root(s) == fs::path("runs/x") / "cache");
  setenv("RDAL_CACHE_DIR", "/tmp/rdal_cache_override", 1);
  CHECK(cache_root(s) == fs::path("/tmp/rdal_cache_override"));
  unsetenv("RDAL_CACHE_DIR");
}

TEST_CASE("ledger round-trips and tolerates a missing file") {
  const fs::path dir = temp_dir("rdal_harness_ledger");
  ExperimentLedger ledger;
  LedgerEntry e;
  e.cell = "rdal_tau50_seed7";
  e.method = "rdal";
  e.tau = 50;
  e.seed = 7;
  e.status = "evaluated";
  e.checkpoint = "cells/rdal_tau50_seed7/best.ckpt";
  e.checkpoint_fnv = 0xdeadbeefcafef00dull;
  e.metrics = "cells/rdal_tau50_seed7/metrics.tsv";
  e.best_score = 0.6931;
  e.val_sed_accuracy = 0.97;
  e.epochs_run = 120;
  ledger.upsert(e);
  save_ledger(dir / "ledger.json", ledger);

  const ExperimentLedger loaded = load_ledger(dir / "ledger.json");
  REQUIRE(loaded.entries.size() == 1);
  const LedgerEntry& g = loaded.entries[0];
  CHECK(g.cell == e.cell);
  CHECK(g.method == e.method);
  CHECK(g.tau == e.tau);
  CHECK(g.seed == e.seed);
  CHECK(g.status == e.status);
  CHECK(g.checkpoint == e.checkpoint);
  CHECK(g.checkpoint_fnv == e.checkpoint_fnv);
  CHECK(g.metrics == e.metrics);
  CHECK(g.best_score == e.best_score);
  CHECK(g.val_sed_accuracy == e.val_sed_accuracy);
  CHECK(g.epochs_run == e.epochs_run);

  CHECK(load_ledger(dir / "absent.json").entries.empty());

  std::ofstream(dir / "broken.json") << "{not json";
  CHECK_THROWS_AS(load_ledger(dir / "broken.json"), IoError);

  LedgerEntry e2 = e;
  e2.epochs_run = 121;
  ledger.upsert(e2);
  CHECK(ledger.entries.size() == 1);
  CHECK(ledger.entries[0].epochs_run == 121);
}

TEST_CASE("cell names carry tau only for probe-cycle methods") {
  CHECK(cell_name(Method::kBaseline, 50, 7) == "baseline_seed7");
  CHECK(cell_name(Method::kNaiveAdv, 50, 7) == "naive_adv_seed7");
  CHECK(cell_name(Method::kRdal, 50, 7) == "rdal_tau50_seed7");
  CHECK(cell_name(Method::kRdalM, 10, 3) == "rdal_m_tau10_seed3");
}

TEST_CASE("select_tau prefers privacy within the accuracy guard") {
  // Single candidate comes back unchanged.
  CHECK(select_tau({{50, 0.9, 0.5}}) == 50);
  // Dominant candidate wins on both criteria.
  CHECK(select_tau({{10, 0.95, 0.71}, {50, 0.90, 0.60}}) == 10);
  // SED tie: the higher converged probe loss wins.
  CHECK(select_tau({{10, 0.95, 0.60}, {30, 0.95, 0.72}, {70, 0.95, 0.65}}) ==
        30);
  // Privacy leader outside the 0.02 guard is excluded.
  CHECK(select_tau({{10, 0.95, 0.60}, {50, 0.90, 0.90}}) == 10);
  // Exact probe-loss tie resolves to the smaller tau.
  CHECK(select_tau({{70, 0.95, 0.66}, {20, 0.95, 0.66}}) == 20);
  CHECK_THROWS_AS(select_tau({}), ConfigError);
}

TEST_CASE("tau_candidates averages over seeds per method") {
  ExperimentLedger ledger;
  LedgerEntry a;
  a.cell = "rdal_tau10_seed1";
  a.method = "rdal";
  a.tau = 10;
  a.val_sed_accuracy = 0.9;
  a.best_score = 0.6;
  ledger.upsert(a);
  LedgerEntry b = a;
  b.cell = "rdal_tau10_seed2";
  b.val_sed_accuracy = 0.8;
  b.best_score = 0.8;
  ledger.upsert(b);
  LedgerEntry c = a;
  c.cell = "rdal_m_tau10_seed1";
  c.method = "rdal_m";
  ledger.upsert(c);

  const auto cands = tau_candidates(ledger, Method::kRdal);
  REQUIRE(cands.size() == 1);
  CHECK(cands[0].tau == 10);
  CHECK(cands[0].val_sed_accuracy == doctest::Approx(0.85));
  CHECK(cands[0].probe_val_lsp == doctest::Approx(0.7));
}

TEST_CASE("training never reads gender labels") {
  SplitData train, val;
  std::mt19937_64 rng(404);
  std::normal_distribution<float> noise(0.0f, 1.0f);
  auto fill = [&](SplitData* d, int n) {
    for (int i = 0; i < n; ++i) {
      FeatureMatrix m;
      m.rows = 8;
      m.cols = 12;
      m.values.resize(96);
      for (auto& v : m.values) v = noise(rng);
      d->x.push_back(std::move(m));
      d->label.push_back(i % 2);
      d->speech.push_back(i % 2 == 0 ? 1 : 0);
      d->gender.push_back(i % 2 == 0 ? std::int8_t(i / 2 % 2)
                                     : std::int8_t(-1));
    }
  };
  fill(&train, 16);
  fill(&val, 8);

  SplitData train_flip = train, val_flip = val;
  for (auto& g : train_flip.gender) g = g < 0 ? g : std::int8_t(1 - g);
  for (auto& g : val_flip.gender) g = g < 0 ? g : std::int8_t(1 - g);

  TrainConfig cfg;
  cfg.method = Method::kRdal;
  cfg.num_classes = 2;
  cfg.batch_size = 4;
  cfg.warmup_epochs = 1;
  cfg.max_epochs = 3;
  cfg.tau = 2;
  cfg.probe_patience = 2;
  cfg.probe_max_epochs = 4;
  cfg.conv_widths = {2, 2, 2, 2};
  cfg.seed = 9;

  Trainer one(cfg, train, val);
  Trainer two(cfg, train_flip, val_flip);
  one.fit(temp_dir("rdal_harness_nogender_a"));
  two.fit(temp_dir("rdal_harness_nogender_b"));

  const auto pa = nn::collect_params(one.feature_extractor(), "F");
  const auto pb = nn::collect_params(two.feature_extractor(), "F");
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(*pa[i].value == *pb[i].value);
  }
}

TEST_CASE("run_matrix trains, evaluates, and resumes idempotently") {
  const fs::path out = temp_dir("rdal_harness_matrix");
  const ExperimentSpec spec = tiny_spec(shared_corpus_dir(), out);

  const MatrixResult first = run_matrix(spec);
  CHECK(first.cells_trained == 4);
  CHECK(first.cells_skipped == 0);
  REQUIRE(first.ledger.entries.size() == 4);
  for (const char* cell : {"baseline_seed5", "naive_adv_seed5",
                           "rdal_tau2_seed5", "rdal_m_tau2_seed5"}) {
    const LedgerEntry* e = first.ledger.find(cell);
    REQUIRE(e != nullptr);
    CHECK(e->status == "evaluated");
    CHECK(fs::exists(out / e->checkpoint));
    CHECK(fs::exists(out / e->metrics));
    CHECK(file_checksum(out / e->checkpoint) == e->checkpoint_fnv);
    const auto runs = load_metrics_tsv(out / e->metrics);
    CHECK(runs.size() == 2);
  }
  CHECK(fs::exists(out / "mask.ckpt"));
  CHECK(fs::exists(out / "ledger.json"));

  // A completed matrix re-runs without any training work.
  const MatrixResult second = run_matrix(spec);
  CHECK(second.cells_trained == 0);
  CHECK(second.cells_skipped == 4);

  // Artifact corruption is detected and only that cell is redone; the
  // frozen mask is reused, not retrained.
  const std::uint64_t mask_sum = file_checksum(out / "mask.ckpt");
  {
    std::ofstream damage(out / "cells/rdal_m_tau2_seed5/best.ckpt",
                         std::ios::app | std::ios::binary);
    damage << 'x';
  }
  const MatrixResult third = run_matrix(spec);
  CHECK(third.cells_trained == 1);
  CHECK(third.cells_skipped == 3);
  CHECK(file_checksum(out / "mask.ckpt") == mask_sum);
}

TEST_CASE("matrix report summarizes cells and logs the tau choice") {
  const fs::path out = temp_dir("rdal_harness_report");
  ExperimentSpec spec = tiny_spec(shared_corpus_dir(), out);
  spec.tau_grid = {1, 2};
  const MatrixResult r =
      run_matrix(spec, {Method::kBaseline, Method::kRdal});
  CHECK(r.cells_trained == 3);

  const std::string text = matrix_report(spec, r.ledger, true);
  CHECK(text.find("baseline_seed5") != std::string::npos);
  CHECK(text.find("rdal_tau1_seed5") != std::string::npos);
  CHECK(text.find("rdal_tau2_seed5") != std::string::npos);
  CHECK(text.find("selected tau for rdal:") != std::string::npos);
  CHECK(fs::exists(out / "report.txt"));
  CHECK(fs::exists(out / "summary.tsv"));

  // The recorded selection equals the grid argmax of the ledger candidates.
  const auto cands = tau_candidates(r.ledger, Method::kRdal);
  const int expect = select_tau(cands);
  CHECK(text.find("selected tau for rdal: " + std::to_string(expect)) !=
        std::string::npos);

  std::ifstream sum(out / "summary.tsv");
  std::string line;
  int lines = 0;
  while (std::getline(sum, line)) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == 4);  // header + three cells
}

TEST_CASE("plot data emits all four files") {
  const fs::path out = temp_dir("rdal_harness_plots_out");
  ExperimentSpec spec = tiny_spec(shared_corpus_dir(), out);
  const MatrixResult r = run_matrix(spec, {Method::kBaseline});
  REQUIRE(r.cells_trained == 1);
  const LedgerEntry* e = r.ledger.find("baseline_seed5");
  REQUIRE(e != nullptr);

  const fs::path plots = out / "plots";
  emit_plot_data(spec, out / e->checkpoint, plots);
  for (const char* name :
       {"roc.tsv", "density.tsv", "projection.tsv", "latents.tsv"}) {
    CHECK(fs::exists(plots / name));
    CHECK(fs::file_size(plots / name) > 0);
  }
}

TEST_CASE("real corpus mode insists on an existing manifest") {
  ExperimentSpec spec = tiny_spec(temp_dir("rdal_harness_nocorpus"),
                                  temp_dir("rdal_harness_nocorpus_out"));
  spec.corpus_mode = "real";
  CHECK_THROWS_AS(run_matrix(spec), ConfigError);
}

TEST_CASE("rdal_m without event-only targets is rejected") {
  const fs::path dir = temp_dir("rdal_harness_notargets");
  CorpusManifest manifest =
      load_manifest(shared_corpus_dir() / "manifest.tsv");
  for (auto& ex : manifest.examples) ex.event_path.clear();
  manifest.root = dir;
  save_manifest(manifest, dir / "manifest.tsv");

  ExperimentSpec spec = tiny_spec(dir, temp_dir("rdal_harness_notargets_out"));
  CHECK_THROWS_AS(run_matrix(spec, {Method::kRdalM}), ConfigError);
}
