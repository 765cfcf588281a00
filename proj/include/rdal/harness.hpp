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

#ifndef RDAL_HARNESS_HPP_
#define RDAL_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rdal/privacy_eval.hpp"
#include "rdal/training.hpp"

namespace rdal {

// Full experiment description: corpus, frontend, training grid, evaluation.
// Parsed from a sectioned key = value file and checked against the schema;
// unknown sections or keys are rejected.
struct ExperimentSpec {
  // [corpus]
  std::string corpus_mode = "synthetic";  // synthetic | real
  SynthCorpusConfig corpus;
  std::filesystem::path corpus_dir = "corpus";

  // [features]
  FrontendConfig frontend;

  // [train] shared across methods; tau comes from the grid for RDAL cells.
  TrainConfig train;
  std::vector<int> tau_grid = {10, 20, 30, 50, 70, 100};
  std::vector<std::uint64_t> seeds = {7};

  // [mask]
  MaskTrainConfig mask;

  // [eval]
  EvalConfig eval;

  // [output]
  std::filesystem::path out_dir = "runs/out";

  void validate() const;
};

ExperimentSpec desk_spec();
ExperimentSpec paper_spec();

ExperimentSpec parse_experiment_ini(const std::string& text);
ExperimentSpec load_experiment_ini(const std::filesystem::path& path);

// Feature cache root: the RDAL_CACHE_DIR environment variable when set,
// otherwise <out_dir>/cache.
std::filesystem::path cache_root(const ExperimentSpec& spec);

// -- Ledger -------------------------------------------------------------------

struct LedgerEntry {
  std::string cell;  // method[_tauN]_seedS
  std::string method;
  int tau = 0;
  std::uint64_t seed = 0;
  std::string status;  // "trained" | "evaluated"
  std::string checkpoint;  // relative to out_dir
  std::uint64_t checkpoint_fnv = 0;
  std::string metrics;  // relative to out_dir; empty until evaluated
  double best_score = 0.0;
  double val_sed_accuracy = 0.0;
  int epochs_run = 0;
};

struct ExperimentLedger {
  std::vector<LedgerEntry> entries;

  const LedgerEntry* find(const std::string& cell) const;
  LedgerEntry* find(const std::string& cell);
  void upsert(const LedgerEntry& entry);
};

// Atomic replacement on save; absent file loads as an empty ledger.
void save_ledger(const std::filesystem::path& path,
                 const ExperimentLedger& ledger);
ExperimentLedger load_ledger(const std::filesystem::path& path);

std::string cell_name(Method method, int tau, std::uint64_t seed);

// -- Matrix -------------------------------------------------------------------

struct MatrixResult {
  ExperimentLedger ledger;
  int cells_trained = 0;
  int cells_skipped = 0;
};

// Corpus build, feature cache, mask pre-training (when the grid holds
// rdal_m), then train + evaluate per (method, tau, seed) cell. Completed
// cells whose artifacts still match their recorded checksums are skipped, so
// an interrupted matrix resumes where it stopped. `only`, when non-empty,
// restricts the matrix to the named methods.
MatrixResult run_matrix(const ExperimentSpec& spec,
                        const std::vector<Method>& only = {});

// -- Tau selection ------------------------------------------------------------

struct TauCandidate {
  int tau = 0;
  double val_sed_accuracy = 0.0;
  double probe_val_lsp = 0.0;  // converged probe validation loss
};

// Highest converged probe loss among candidates whose validation SED
// accuracy is within 0.02 of the per-grid best; ties go to the smaller tau.
int select_tau(const std::vector<TauCandidate>& candidates);

// Selection table for one method from the ledger, averaged over seeds.
std::vector<TauCandidate> tau_candidates(const ExperimentLedger& ledger,
                                         Method method);

// -- Reporting ----------------------------------------------------------------

// Cross-method summary: per cell the aggregate metrics, plus the selected
// tau per RDAL method. Returns the report text and writes report.txt and
// summary.tsv under out_dir when emit is set.
std::string matrix_report(const ExperimentSpec& spec,
                          const ExperimentLedger& ledger, bool emit);

// Plot data for one trained cell: roc.tsv, density.tsv, projection.tsv and
// latents.tsv under plot_dir, using one fresh attacker.
void emit_plot_data(const ExperimentSpec& spec,
                    const std::filesystem::path& checkpoint,
                    const std::filesystem::path& plot_dir);

}  // namespace rdal

#endif  // RDAL_HARNESS_HPP_
