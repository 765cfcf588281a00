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

#include "rdal/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rdal {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// -- Sectioned key = value parsing --------------------------------------------

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

using IniDoc = std::map<std::string, std::map<std::string, std::string>>;

IniDoc parse_ini(const std::string& text) {
  IniDoc doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": empty section name");
      }
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": key outside any section");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }
    if (!doc[section].emplace(key, value).second) {
      throw ConfigError("duplicate key " + key + " in [" + section + "]");
    }
  }
  return doc;
}

long long to_ll(const std::string& section, const std::string& key,
                const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.empty()) {
    throw ConfigError("[" + section + "] " + key + ": not an integer: " + v);
  }
  return out;
}

int to_int(const std::string& s, const std::string& k, const std::string& v) {
  return int(to_ll(s, k, v));
}

std::uint64_t to_u64(const std::string& s, const std::string& k,
                     const std::string& v) {
  const long long x = to_ll(s, k, v);
  if (x < 0) throw ConfigError("[" + s + "] " + k + ": must be >= 0");
  return std::uint64_t(x);
}

double to_double(const std::string& s, const std::string& k,
                 const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size() || v.empty()) {
    throw ConfigError("[" + s + "] " + k + ": not a number: " + v);
  }
  return out;
}

bool to_bool(const std::string& s, const std::string& k,
             const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("[" + s + "] " + k + ": expected true or false");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// -- Schema -------------------------------------------------------------------

void apply_schema(const IniDoc& doc, ExperimentSpec* spec) {
  const std::map<std::string, std::set<std::string>> schema = {
      {"corpus",
       {"mode", "classes", "segments_per_class", "test_fraction",
        "val_fraction", "seed", "dir"}},
      {"features", {"mel_on_magnitude"}},
      {"train",
       {"batch_size", "learning_rate", "momentum", "warmup_epochs",
        "max_epochs", "gamma", "tau", "patience", "probe_patience",
        "probe_max_epochs", "conv_widths", "tau_grid", "seeds"}},
      {"mask",
       {"base", "batch_size", "max_epochs", "patience", "learning_rate",
        "momentum", "seed"}},
      {"eval",
       {"runs", "seed", "attacker_batch_size", "attacker_learning_rate",
        "attacker_momentum", "attacker_patience", "attacker_max_epochs"}},
      {"output", {"dir"}},
  };
  for (const auto& [section, keys] : doc) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("unknown section [" + section +
                                              "]");
    for (const auto& [key, value] : keys) {
      if (it->second.find(key) == it->second.end()) {
        throw ConfigError("unknown key " + key + " in [" + section + "]");
      }
      (void)value;
    }
  }

  auto get = [&](const char* sec, const char* key) -> const std::string* {
    const auto s = doc.find(sec);
    if (s == doc.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };

  if (const auto* v = get("corpus", "mode")) {
    if (*v != "synthetic" && *v != "real") {
      throw ConfigError("[corpus] mode: expected synthetic or real");
    }
    spec->corpus_mode = *v;
  }
  if (const auto* v = get("corpus", "classes")) {
    spec->corpus.num_classes = to_int("corpus", "classes", *v);
    spec->train.num_classes = spec->corpus.num_classes;
  }
  if (const auto* v = get("corpus", "segments_per_class")) {
    spec->corpus.segments_per_class =
        to_int("corpus", "segments_per_class", *v);
  }
  if (const auto* v = get("corpus", "test_fraction")) {
    spec->corpus.test_fraction = to_double("corpus", "test_fraction", *v);
  }
  if (const auto* v = get("corpus", "val_fraction")) {
    spec->corpus.val_fraction = to_double("corpus", "val_fraction", *v);
  }
  if (const auto* v = get("corpus", "seed")) {
    spec->corpus.seed = to_u64("corpus", "seed", *v);
  }
  if (const auto* v = get("corpus", "dir")) spec->corpus_dir = *v;

  if (const auto* v = get("features", "mel_on_magnitude")) {
    spec->frontend.mel_on_magnitude =
        to_bool("features", "mel_on_magnitude", *v);
    spec->train.frontend = spec->frontend;
  }

  if (const auto* v = get("train", "batch_size")) {
    spec->train.batch_size = to_int("train", "batch_size", *v);
  }
  if (const auto* v = get("train", "learning_rate")) {
    spec->train.learning_rate = to_double("train", "learning_rate", *v);
  }
  if (const auto* v = get("train", "momentum")) {
    spec->train.momentum = to_double("train", "momentum", *v);
  }
  if (const auto* v = get("train", "warmup_epochs")) {
    spec->train.warmup_epochs = to_int("train", "warmup_epochs", *v);
  }
  if (const auto* v = get("train", "max_epochs")) {
    spec->train.max_epochs = to_int("train", "max_epochs", *v);
  }
  if (const auto* v = get("train", "gamma")) {
    spec->train.gamma = to_double("train", "gamma", *v);
  }
  if (const auto* v = get("train", "tau")) {
    spec->train.tau = to_int("train", "tau", *v);
  }
  if (const auto* v = get("train", "patience")) {
    spec->train.patience = to_int("train", "patience", *v);
  }
  if (const auto* v = get("train", "probe_patience")) {
    spec->train.probe_patience = to_int("train", "probe_patience", *v);
  }
  if (const auto* v = get("train", "probe_max_epochs")) {
    spec->train.probe_max_epochs = to_int("train", "probe_max_epochs", *v);
  }
  if (const auto* v = get("train", "conv_widths")) {
    const auto items = split_commas(*v);
    if (items.size() != 4) {
      throw ConfigError("[train] conv_widths: expected four values");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      spec->train.conv_widths[i] = to_int("train", "conv_widths", items[i]);
    }
  }
  if (const auto* v = get("train", "tau_grid")) {
    spec->tau_grid.clear();
    for (const auto& item : split_commas(*v)) {
      spec->tau_grid.push_back(to_int("train", "tau_grid", item));
    }
  }
  if (const auto* v = get("train", "seeds")) {
    spec->seeds.clear();
    for (const auto& item : split_commas(*v)) {
      spec->seeds.push_back(to_u64("train", "seeds", item));
    }
  }

  if (const auto* v = get("mask", "base")) {
    spec->mask.base = to_int("mask", "base", *v);
  }
  if (const auto* v = get("mask", "batch_size")) {
    spec->mask.batch_size = to_int("mask", "batch_size", *v);
  }
  if (const auto* v = get("mask", "max_epochs")) {
    spec->mask.max_epochs = to_int("mask", "max_epochs", *v);
  }
  if (const auto* v = get("mask", "patience")) {
    spec->mask.patience = to_int("mask", "patience", *v);
  }
  if (const auto* v = get("mask", "learning_rate")) {
    spec->mask.learning_rate = to_double("mask", "learning_rate", *v);
  }
  if (const auto* v = get("mask", "momentum")) {
    spec->mask.momentum = to_double("mask", "momentum", *v);
  }
  if (const auto* v = get("mask", "seed")) {
    spec->mask.seed = to_u64("mask", "seed", *v);
  }

  if (const auto* v = get("eval", "runs")) {
    spec->eval.runs = to_int("eval", "runs", *v);
  }
  if (const auto* v = get("eval", "seed")) {
    spec->eval.seed = to_u64("eval", "seed", *v);
  }
  if (const auto* v = get("eval", "attacker_batch_size")) {
    spec->eval.attacker.batch_size =
        to_int("eval", "attacker_batch_size", *v);
  }
  if (const auto* v = get("eval", "attacker_learning_rate")) {
    spec->eval.attacker.learning_rate =
        to_double("eval", "attacker_learning_rate", *v);
  }
  if (const auto* v = get("eval", "attacker_momentum")) {
    spec->eval.attacker.momentum =
        to_double("eval", "attacker_momentum", *v);
  }
  if (const auto* v = get("eval", "attacker_patience")) {
    spec->eval.attacker.patience = to_int("eval", "attacker_patience", *v);
  }
  if (const auto* v = get("eval", "attacker_max_epochs")) {
    spec->eval.attacker.max_epochs =
        to_int("eval", "attacker_max_epochs", *v);
  }

  if (const auto* v = get("output", "dir")) spec->out_dir = *v;
}

// -- Matrix helpers -----------------------------------------------------------

std::uint64_t file_fnv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return fnv1a64(bytes.data(), bytes.size());
}

double val_sed_accuracy(Trainer* trainer, const SplitData& val) {
  nn::Tensor<float> z = extract_latents(trainer->feature_extractor(), val);
  nn::Tensor<float> logits = trainer->event_classifier()->forward(z, false);
  int hit = 0;
  for (int i = 0; i < logits.n; ++i) {
    const float* row = &logits.data[std::size_t(i) * logits.c];
    const int arg = int(std::max_element(row, row + logits.c) - row);
    if (arg == val.label[std::size_t(i)]) ++hit;
  }
  return logits.n == 0 ? 0.0 : double(hit) / logits.n;
}

bool uses_probe_cycles(Method m) {
  return m == Method::kRdal || m == Method::kRdalM;
}

json entry_to_json(const LedgerEntry& e) {
  json j;
  j["cell"] = e.cell;
  j["method"] = e.method;
  j["tau"] = e.tau;
  j["seed"] = e.seed;
  j["status"] = e.status;
  j["checkpoint"] = e.checkpoint;
  j["checkpoint_fnv"] = e.checkpoint_fnv;
  j["metrics"] = e.metrics;
  j["best_score"] = e.best_score;
  j["val_sed_accuracy"] = e.val_sed_accuracy;
  j["epochs_run"] = e.epochs_run;
  return j;
}

LedgerEntry entry_from_json(const json& j) {
  LedgerEntry e;
  e.cell = j.at("cell").get<std::string>();
  e.method = j.at("method").get<std::string>();
  e.tau = j.at("tau").get<int>();
  e.seed = j.at("seed").get<std::uint64_t>();
  e.status = j.at("status").get<std::string>();
  e.checkpoint = j.at("checkpoint").get<std::string>();
  e.checkpoint_fnv = j.at("checkpoint_fnv").get<std::uint64_t>();
  e.metrics = j.at("metrics").get<std::string>();
  e.best_score = j.at("best_score").get<double>();
  e.val_sed_accuracy = j.at("val_sed_accuracy").get<double>();
  e.epochs_run = j.at("epochs_run").get<int>();
  return e;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (corpus_mode != "synthetic" && corpus_mode != "real") {
    throw ConfigError("corpus mode must be synthetic or real");
  }
  if (tau_grid.empty()) throw ConfigError("tau_grid must be non-empty");
  for (int t : tau_grid) {
    if (t < 1) throw ConfigError("tau_grid entries must be >= 1");
  }
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (corpus_dir.empty() || out_dir.empty()) {
    throw ConfigError("corpus and output directories must be set");
  }
  TrainConfig probe_check = train;
  probe_check.method = Method::kBaseline;  // mask path is provided per cell
  probe_check.validate();
  eval.validate();
}

ExperimentSpec desk_spec() {
  ExperimentSpec s;
  s.corpus.num_classes = 4;
  s.corpus.segments_per_class = 150;
  s.corpus.seed = 7;
  s.corpus_dir = "corpus/desk";
  s.train.num_classes = 4;
  s.train.max_epochs = 300;
  s.train.warmup_epochs = 30;
  s.train.tau = 10;
  s.train.conv_widths = {8, 16, 32, 64};
  s.tau_grid = {10, 50};
  s.seeds = {7};
  s.mask.base = 4;
  s.mask.max_epochs = 15;
  s.mask.learning_rate = 0.05;
  s.eval.runs = 3;
  s.eval.seed = 7;
  s.out_dir = "runs/desk";
  return s;
}

ExperimentSpec paper_spec() {
  ExperimentSpec s;
  s.corpus_mode = "real";
  s.corpus.num_classes = 12;
  s.corpus_dir = "corpus/paper";
  s.train.num_classes = 12;
  s.train.max_epochs = 5000;
  s.train.tau = 50;
  s.train.conv_widths = kFullConvWidths;
  s.tau_grid = {10, 20, 30, 50, 70, 100};
  s.seeds = {7};
  s.mask.base = 16;
  s.eval.runs = 10;
  s.eval.seed = 7;
  s.out_dir = "runs/paper";
  return s;
}

ExperimentSpec parse_experiment_ini(const std::string& text) {
  ExperimentSpec spec;
  apply_schema(parse_ini(text), &spec);
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_ini(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_ini(ss.str());
}

fs::path cache_root(const ExperimentSpec& spec) {
  if (const char* env = std::getenv("RDAL_CACHE_DIR")) {
    if (env[0] != '\0') return fs::path(env);
  }
  return spec.out_dir / "cache";
}

// -- Ledger -------------------------------------------------------------------

const LedgerEntry* ExperimentLedger::find(const std::string& cell) const {
  for (const auto& e : entries) {
    if (e.cell == cell) return &e;
  }
  return nullptr;
}

LedgerEntry* ExperimentLedger::find(const std::string& cell) {
  for (auto& e : entries) {
    if (e.cell == cell) return &e;
  }
  return nullptr;
}

void ExperimentLedger::upsert(const LedgerEntry& entry) {
  if (LedgerEntry* existing = find(entry.cell)) {
    *existing = entry;
  } else {
    entries.push_back(entry);
  }
}

void save_ledger(const fs::path& path, const ExperimentLedger& ledger) {
  json j;
  j["version"] = 1;
  j["entries"] = json::array();
  for (const auto& e : ledger.entries) j["entries"].push_back(entry_to_json(e));

  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

ExperimentLedger load_ledger(const fs::path& path) {
  ExperimentLedger ledger;
  std::ifstream in(path);
  if (!in) return ledger;
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed ledger " + path.string() + ": " + e.what());
  }
  if (j.value("version", 0) != 1) {
    throw IoError("unsupported ledger version in " + path.string());
  }
  for (const auto& item : j.at("entries")) {
    ledger.entries.push_back(entry_from_json(item));
  }
  return ledger;
}

std::string cell_name(Method method, int tau, std::uint64_t seed) {
  std::string name = method_name(method);
  if (uses_probe_cycles(method)) name += "_tau" + std::to_string(tau);
  name += "_seed" + std::to_string(seed);
  return name;
}

// -- Matrix -------------------------------------------------------------------

MatrixResult run_matrix(const ExperimentSpec& spec,
                        const std::vector<Method>& only) {
  spec.validate();
  fs::create_directories(spec.out_dir);

  CorpusManifest manifest;
  const fs::path manifest_path = spec.corpus_dir / "manifest.tsv";
  if (fs::exists(manifest_path)) {
    manifest = load_manifest(manifest_path);
  } else if (spec.corpus_mode == "synthetic") {
    manifest = build_synthetic_corpus(spec.corpus, spec.corpus_dir);
  } else {
    throw ConfigError("real corpus mode needs an existing manifest at " +
                      manifest_path.string());
  }

  const fs::path cache_dir = cache_root(spec);
  const FeatureCache plain_cache{cache_dir, spec.frontend.tag()};
  const FeatureCache masked_cache{cache_dir, spec.frontend.tag() + "_masked"};

  std::vector<Method> methods = only;
  if (methods.empty()) {
    methods = {Method::kBaseline, Method::kNaiveAdv, Method::kRdal,
               Method::kRdalM};
  }

  MatrixResult result;
  result.ledger = load_ledger(spec.out_dir / "ledger.json");

  // Mask pre-training happens once, before any rdal_m cell.
  const bool wants_mask =
      std::find(methods.begin(), methods.end(), Method::kRdalM) !=
      methods.end();
  const fs::path mask_path = spec.out_dir / "mask.ckpt";
  std::unique_ptr<MaskNet<float>> mask;
  if (wants_mask) {
    if (!manifest.has_event_targets()) {
      throw ConfigError(
          "rdal_m needs event-only targets, which only simulated mixtures "
          "retain; this corpus has none");
    }
    if (!fs::exists(mask_path)) {
      pretrain_masknet(manifest, spec.mask, mask_path);
    }
    mask = load_masknet(mask_path);
  }

  // Splits are featurized once per frontend variant and shared across cells.
  SplitData train_plain, val_plain, train_masked, val_masked;
  bool plain_ready = false, masked_ready = false;
  auto splits_for = [&](Method m) -> std::pair<SplitData*, SplitData*> {
    if (m == Method::kRdalM) {
      if (!masked_ready) {
        train_masked = prepare_split(manifest, Split::kTrain, spec.frontend,
                                     mask.get(), &masked_cache);
        val_masked = prepare_split(manifest, Split::kValidation,
                                   spec.frontend, mask.get(), &masked_cache);
        masked_ready = true;
      }
      return {&train_masked, &val_masked};
    }
    if (!plain_ready) {
      train_plain = prepare_split(manifest, Split::kTrain, spec.frontend,
                                  nullptr, &plain_cache);
      val_plain = prepare_split(manifest, Split::kValidation, spec.frontend,
                                nullptr, &plain_cache);
      plain_ready = true;
    }
    return {&train_plain, &val_plain};
  };

  for (Method method : methods) {
    const std::vector<int> taus =
        uses_probe_cycles(method) ? spec.tau_grid
                                  : std::vector<int>{spec.train.tau};
    for (int tau : taus) {
      for (std::uint64_t seed : spec.seeds) {
        const std::string cell = cell_name(method, tau, seed);
        const fs::path cell_dir = spec.out_dir / "cells" / cell;
        if (const LedgerEntry* e = result.ledger.find(cell)) {
          const fs::path ckpt = spec.out_dir / e->checkpoint;
          const fs::path metrics = spec.out_dir / e->metrics;
          if (e->status == "evaluated" && fs::exists(ckpt) &&
              fs::exists(metrics) && file_fnv(ckpt) == e->checkpoint_fnv) {
            ++result.cells_skipped;
            continue;
          }
        }

        TrainConfig tc = spec.train;
        tc.method = method;
        tc.tau = tau;
        tc.seed = seed;
        tc.num_classes = manifest.num_classes;
        tc.frontend = spec.frontend;
        tc.mask_checkpoint =
            method == Method::kRdalM ? mask_path : fs::path();
        tc.validate();

        auto [train_data, val_data] = splits_for(method);
        Trainer trainer(tc, *train_data, *val_data);
        const FitResult fit = trainer.fit(cell_dir);

        LedgerEntry entry;
        entry.cell = cell;
        entry.method = method_name(method);
        entry.tau = tau;
        entry.seed = seed;
        entry.status = "trained";
        entry.checkpoint =
            fs::relative(fit.best_checkpoint, spec.out_dir).string();
        entry.checkpoint_fnv = file_fnv(fit.best_checkpoint);
        entry.best_score = fit.best_score;
        entry.val_sed_accuracy = val_sed_accuracy(&trainer, *val_data);
        entry.epochs_run = fit.epochs_run;
        result.ledger.upsert(entry);
        save_ledger(spec.out_dir / "ledger.json", result.ledger);

        EvalConfig ec = spec.eval;
        ec.mask_checkpoint =
            method == Method::kRdalM ? mask_path : fs::path();
        ec.cache = method == Method::kRdalM ? &masked_cache : &plain_cache;
        const EvaluationResult er =
            evaluate(fit.best_checkpoint, manifest, ec);
        write_metrics_tsv(cell_dir / "metrics.tsv", er.runs);
        std::ofstream report(cell_dir / "report.txt", std::ios::trunc);
        report << format_report(cell, er.aggregate);

        entry.status = "evaluated";
        entry.metrics =
            fs::relative(cell_dir / "metrics.tsv", spec.out_dir).string();
        result.ledger.upsert(entry);
        save_ledger(spec.out_dir / "ledger.json", result.ledger);
        ++result.cells_trained;
      }
    }
  }
  return result;
}

// -- Tau selection ------------------------------------------------------------

int select_tau(const std::vector<TauCandidate>& candidates) {
  if (candidates.empty()) throw ConfigError("select_tau: no candidates");
  double best_sed = candidates[0].val_sed_accuracy;
  for (const auto& c : candidates) {
    best_sed = std::max(best_sed, c.val_sed_accuracy);
  }
  const TauCandidate* pick = nullptr;
  for (const auto& c : candidates) {
    if (c.val_sed_accuracy < best_sed - 0.02) continue;
    if (pick == nullptr || c.probe_val_lsp > pick->probe_val_lsp ||
        (c.probe_val_lsp == pick->probe_val_lsp && c.tau < pick->tau)) {
      pick = &c;
    }
  }
  return pick->tau;
}

std::vector<TauCandidate> tau_candidates(const ExperimentLedger& ledger,
                                         Method method) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_tau;
  for (const auto& e : ledger.entries) {
    if (e.method != method_name(method)) continue;
    by_tau[e.tau].first.push_back(e.val_sed_accuracy);
    by_tau[e.tau].second.push_back(e.best_score);
  }
  std::vector<TauCandidate> out;
  for (const auto& [tau, values] : by_tau) {
    out.push_back({tau, mean_of(values.first), mean_of(values.second)});
  }
  return out;
}

// -- Reporting ----------------------------------------------------------------

std::string matrix_report(const ExperimentSpec& spec,
                          const ExperimentLedger& ledger, bool emit) {
  std::string text;
  std::string tsv =
      "cell\tmethod\ttau\tseed\tepochs\tval_sed_accuracy"
      "\tsed_accuracy\tsad_accuracy\tsad_auc\tsad_density_overlap"
      "\tgd_accuracy\tgd_auc\n";
  char buf[256];
  for (const auto& e : ledger.entries) {
    if (e.status != "evaluated") continue;
    const auto runs = load_metrics_tsv(spec.out_dir / e.metrics);
    const AggregateReport agg = aggregate_runs(runs);
    text += format_report(e.cell, agg);
    text += "\n";
    std::snprintf(buf, sizeof buf,
                  "%s\t%s\t%d\t%llu\t%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f"
                  "\t%.6f\n",
                  e.cell.c_str(), e.method.c_str(), e.tau,
                  static_cast<unsigned long long>(e.seed), e.epochs_run,
                  e.val_sed_accuracy, agg.sed_accuracy.mean,
                  agg.sad_accuracy.mean, agg.sad_auc.mean,
                  agg.sad_density_overlap.mean, agg.gd_accuracy.mean,
                  agg.gd_auc.mean);
    tsv += buf;
  }
  for (Method m : {Method::kRdal, Method::kRdalM}) {
    const auto candidates = tau_candidates(ledger, m);
    if (candidates.empty()) continue;
    const int tau = select_tau(candidates);
    std::snprintf(buf, sizeof buf,
                  "selected tau for %s: %d (criterion: highest converged "
                  "probe validation loss, SED accuracy within 0.02 of the "
                  "grid best)\n",
                  method_name(m), tau);
    text += buf;
  }
  if (emit) {
    std::ofstream rep(spec.out_dir / "report.txt", std::ios::trunc);
    if (!rep) throw IoError("cannot write report.txt");
    rep << text;
    std::ofstream sum(spec.out_dir / "summary.tsv", std::ios::trunc);
    if (!sum) throw IoError("cannot write summary.tsv");
    sum << tsv;
  }
  return text;
}

void emit_plot_data(const ExperimentSpec& spec, const fs::path& checkpoint,
                    const fs::path& plot_dir) {
  const CorpusManifest manifest =
      load_manifest(spec.corpus_dir / "manifest.tsv");
  LoadedModel model = load_model(checkpoint);

  std::unique_ptr<MaskNet<float>> mask;
  const fs::path cache_dir = cache_root(spec);
  std::string tag = spec.frontend.tag();
  if (model.method == Method::kRdalM) {
    mask = load_masknet(spec.out_dir / "mask.ckpt");
    tag += "_masked";
  }
  const FeatureCache cache{cache_dir, tag};
  const LatentDataset data = extract_latent_dataset(
      model.f.get(), manifest, spec.frontend, mask.get(), &cache);

  fs::create_directories(plot_dir);
  write_latents_tsv(plot_dir / "latents.tsv", data);

  ProbeResult attacker = train_attacker(data, AttackTarget::kSpeech,
                                        spec.eval.attacker,
                                        mix_seed(spec.eval.seed, "attacker"));
  std::vector<double> scores;
  std::vector<int> labels;
  {
    std::vector<int> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.split[i] == Split::kTest) rows.push_back(int(i));
    }
    nn::Tensor<float> test_z(int(rows.size()), data.z.c, 1, 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(&data.z.data[std::size_t(rows[i]) * data.z.c], data.z.c,
                  &test_z.data[i * std::size_t(data.z.c)]);
      labels.push_back(int(data.speech[std::size_t(rows[i])]));
    }
    nn::Tensor<float> probs = forward_speech(*attacker.net, test_z, false);
    scores.assign(probs.data.begin(), probs.data.end());
  }
  write_roc_tsv(plot_dir / "roc.tsv", roc_curve(scores, labels));
  const auto densities = probability_density(scores, labels);
  write_density_tsv(plot_dir / "density.tsv", densities.first,
                    densities.second);

  std::vector<std::vector<double>> rows(data.size(),
                                        std::vector<double>(data.z.c));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.z.c; ++j) {
      rows[i][std::size_t(j)] =
          double(data.z.data[i * std::size_t(data.z.c) + std::size_t(j)]);
    }
  }
  write_projection_tsv(plot_dir / "projection.tsv", project_2d(rows), data);
}

}  // namespace rdal
