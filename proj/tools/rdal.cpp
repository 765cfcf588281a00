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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rdal/harness.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  auto* config = cmd->add_option("--config", args->config,
                                 "experiment config file");
  auto* preset = cmd->add_option("--preset", args->preset,
                                 "built-in config: desk or paper");
  preset->excludes(config);
  cmd->add_option("--seed", args->seed, "override the experiment seed");
  cmd->add_option("--out", args->out, "override the output directory");
}

rdal::ExperimentSpec resolve_spec(const CommonArgs& args) {
  rdal::ExperimentSpec spec;
  if (!args.preset.empty()) {
    if (args.preset == "desk") {
      spec = rdal::desk_spec();
    } else if (args.preset == "paper") {
      spec = rdal::paper_spec();
    } else {
      throw rdal::ConfigError("unknown preset: " + args.preset);
    }
  } else if (!args.config.empty()) {
    spec = rdal::load_experiment_ini(args.config);
  } else {
    throw rdal::ConfigError("either --config or --preset is required");
  }
  if (args.seed) {
    spec.corpus.seed = *args.seed;
    spec.seeds = {*args.seed};
    spec.eval.seed = *args.seed;
    spec.mask.seed = *args.seed;
  }
  if (!args.out.empty()) spec.out_dir = args.out;
  return spec;
}

int run(int argc, char** argv) {
  CLI::App app{"Privacy-preserving audio representation experiments"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth-corpus", "build the synthetic mixture corpus");
  add_common(synth, &synth_args);

  CommonArgs feat_args;
  auto* feat = app.add_subcommand(
      "featurize", "warm the log-mel feature cache for every split");
  add_common(feat, &feat_args);

  CommonArgs mask_args;
  auto* mask = app.add_subcommand(
      "pretrain-mask", "pre-train the frozen speech-suppression mask");
  add_common(mask, &mask_args);

  CommonArgs train_args;
  std::string train_method;
  int train_tau = 0;
  auto* train = app.add_subcommand(
      "train", "train and evaluate the method matrix (resumable)");
  add_common(train, &train_args);
  train->add_option("--method", train_method,
                    "restrict to one method: baseline, naive_adv, rdal, "
                    "rdal_m");
  train->add_option("--tau", train_tau,
                    "restrict the probe-cycle grid to one value");

  CommonArgs eval_args;
  std::string eval_ckpt;
  auto* eval = app.add_subcommand(
      "evaluate", "attack a trained checkpoint with fresh probes");
  add_common(eval, &eval_args);
  eval->add_option("--checkpoint", eval_ckpt, "training checkpoint")
      ->required();

  CommonArgs report_args;
  auto* report = app.add_subcommand(
      "report", "summarize all evaluated cells and the selected tau");
  add_common(report, &report_args);

  CommonArgs plots_args;
  std::string plots_ckpt;
  auto* plots = app.add_subcommand(
      "plots", "emit roc, density, projection and latent plot data");
  add_common(plots, &plots_args);
  plots->add_option("--checkpoint", plots_ckpt, "training checkpoint")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(synth_args);
    const fs::path dir =
        synth_args.out.empty() ? spec.corpus_dir : fs::path(synth_args.out);
    if (spec.corpus_mode != "synthetic") {
      throw rdal::ConfigError("synth-corpus needs corpus mode synthetic");
    }
    const rdal::CorpusManifest manifest =
        rdal::build_synthetic_corpus(spec.corpus, dir);
    std::printf("corpus: %zu examples, %d classes, at %s\n",
                manifest.examples.size(), manifest.num_classes,
                dir.string().c_str());
    return 0;
  }

  if (feat->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(feat_args);
    const rdal::CorpusManifest manifest =
        rdal::load_manifest(spec.corpus_dir / "manifest.tsv");
    const rdal::FeatureCache cache{rdal::cache_root(spec),
                                   spec.frontend.tag()};
    std::size_t total = 0;
    for (rdal::Split split : rdal::kAllSplits) {
      total += rdal::prepare_split(manifest, split, spec.frontend, nullptr,
                                   &cache)
                   .size();
    }
    std::printf("featurized %zu examples into %s\n", total,
                rdal::cache_root(spec).string().c_str());
    return 0;
  }

  if (mask->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(mask_args);
    const rdal::CorpusManifest manifest =
        rdal::load_manifest(spec.corpus_dir / "manifest.tsv");
    const fs::path out = spec.out_dir / "mask.ckpt";
    const rdal::MaskTrainResult r =
        rdal::pretrain_masknet(manifest, spec.mask, out);
    std::printf("mask: val mse %.6g (unmasked %.6g) after %d epochs -> %s\n",
                r.val_mse, r.unmasked_mse, r.epochs, out.string().c_str());
    return 0;
  }

  if (train->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(train_args);
    std::vector<rdal::Method> only;
    if (!train_method.empty()) {
      only.push_back(rdal::parse_method(train_method));
    }
    if (train_tau > 0) spec.tau_grid = {train_tau};
    const rdal::MatrixResult r = rdal::run_matrix(spec, only);
    std::printf("matrix: %d cells trained, %d skipped; ledger at %s\n",
                r.cells_trained, r.cells_skipped,
                (spec.out_dir / "ledger.json").string().c_str());
    return 0;
  }

  if (eval->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(eval_args);
    const rdal::CorpusManifest manifest =
        rdal::load_manifest(spec.corpus_dir / "manifest.tsv");
    const rdal::LoadedModel model = rdal::load_model(eval_ckpt);
    std::string tag = spec.frontend.tag();
    rdal::EvalConfig ec = spec.eval;
    if (model.method == rdal::Method::kRdalM) {
      ec.mask_checkpoint = spec.out_dir / "mask.ckpt";
      tag += "_masked";
    }
    const rdal::FeatureCache cache{rdal::cache_root(spec), tag};
    ec.cache = &cache;
    const rdal::EvaluationResult r =
        rdal::evaluate(eval_ckpt, manifest, ec);
    const fs::path dir =
        eval_args.out.empty() ? spec.out_dir / "eval" : fs::path(eval_args.out);
    fs::create_directories(dir);
    rdal::write_metrics_tsv(dir / "metrics.tsv", r.runs);
    const std::string text = rdal::format_report(
        fs::path(eval_ckpt).stem().string(), r.aggregate);
    std::ofstream(dir / "report.txt", std::ios::trunc) << text;
    std::fputs(text.c_str(), stdout);
    return 0;
  }

  if (report->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(report_args);
    const rdal::ExperimentLedger ledger =
        rdal::load_ledger(spec.out_dir / "ledger.json");
    std::fputs(rdal::matrix_report(spec, ledger, true).c_str(), stdout);
    return 0;
  }

  if (plots->parsed()) {
    rdal::ExperimentSpec spec = resolve_spec(plots_args);
    const fs::path dir = plots_args.out.empty() ? spec.out_dir / "plots"
                                                : fs::path(plots_args.out);
    rdal::emit_plot_data(spec, plots_ckpt, dir);
    std::printf("plot data at %s\n", dir.string().c_str());
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const rdal::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
