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

#include "rdal/privacy_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <utility>

namespace rdal {
namespace {

namespace fs = std::filesystem;

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_float(float v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Rows of one split as a (n, 64) tensor plus per-row targets.
void gather_split(const LatentDataset& data, Split split,
                  const std::vector<float>& target_all,
                  const std::vector<std::uint8_t>& keep,
                  nn::Tensor<float>* z_out, std::vector<float>* t_out) {
  std::vector<int> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.split[i] == split && keep[i]) rows.push_back(int(i));
  }
  *z_out = nn::Tensor<float>(int(rows.size()), data.z.c, 1, 1);
  t_out->resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(&data.z.data[std::size_t(rows[i]) * data.z.c], data.z.c,
                &z_out->data[i * std::size_t(data.z.c)]);
    (*t_out)[i] = target_all[std::size_t(rows[i])];
  }
}

double binary_accuracy(const std::vector<double>& probs,
                       const std::vector<int>& labels) {
  int hit = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if ((probs[i] >= 0.5) == (labels[i] != 0)) ++hit;
  return probs.empty() ? 0.0 : double(hit) / double(probs.size());
}

// Sigmoid outputs of an attacker over latent rows.
std::vector<double> attacker_scores(nn::Sequential<float>* net,
                                    const nn::Tensor<float>& z) {
  nn::Tensor<float> probs = forward_speech(*net, z, false);
  std::vector<double> out(probs.data.begin(), probs.data.end());
  return out;
}

std::array<int, 4> parse_widths(const std::string& csv) {
  std::array<int, 4> widths{};
  std::stringstream ss(csv);
  std::string item;
  int i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 4) throw IoError("conv_widths holds more than four entries");
    widths[std::size_t(i++)] = std::stoi(item);
  }
  if (i != 4) throw IoError("conv_widths holds fewer than four entries");
  return widths;
}

const std::string& meta_at(const Checkpoint& ck, const std::string& key) {
  auto it = ck.meta.find(key);
  if (it == ck.meta.end()) throw IoError("checkpoint lacks meta key " + key);
  return it->second;
}

}  // namespace

LoadedModel load_model(const fs::path& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (meta_at(ck, "format") != "rdal-train") {
    throw IoError("not a training checkpoint: " + checkpoint_path.string());
  }
  LoadedModel model;
  model.method = parse_method(meta_at(ck, "method"));
  model.num_classes = std::stoi(meta_at(ck, "num_classes"));
  model.conv_widths = parse_widths(meta_at(ck, "conv_widths"));
  model.frontend_tag = meta_at(ck, "frontend");

  std::mt19937_64 rng = make_rng(0, "model-load");
  model.f = build_feature_extractor<float>(model.conv_widths, &rng);
  model.c = build_event_classifier<float>(model.num_classes, &rng);
  load_params(ck, nn::collect_params(model.f.get(), "F"));
  load_params(ck, nn::collect_params(model.c.get(), "C"));
  return model;
}

LatentDataset extract_latent_dataset(nn::Module<float>* f,
                                     const CorpusManifest& manifest,
                                     const FrontendConfig& frontend,
                                     MaskNet<float>* mask,
                                     const FeatureCache* cache) {
  LatentDataset out;
  std::vector<nn::Tensor<float>> chunks;
  std::size_t total = 0;
  for (Split split : kAllSplits) {
    SplitData data = prepare_split(manifest, split, frontend, mask, cache);
    for (const auto& ex : manifest.examples) {
      if (ex.split != split) continue;
      out.id.push_back(ex.id);
      out.split.push_back(split);
    }
    out.label.insert(out.label.end(), data.label.begin(), data.label.end());
    out.speech.insert(out.speech.end(), data.speech.begin(),
                      data.speech.end());
    out.gender.insert(out.gender.end(), data.gender.begin(),
                      data.gender.end());
    chunks.push_back(extract_latents(f, data));
    total += std::size_t(chunks.back().n);
  }
  out.z = nn::Tensor<float>(int(total), kLatentDim, 1, 1);
  std::size_t offset = 0;
  for (const auto& chunk : chunks) {
    std::copy(chunk.data.begin(), chunk.data.end(), out.z.data.begin() +
              std::ptrdiff_t(offset));
    offset += chunk.data.size();
  }
  return out;
}

void write_latents_tsv(const fs::path& path, const LatentDataset& data) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id\tsplit\tlabel\tspeech\tgender";
  for (int j = 0; j < data.z.c; ++j) out << "\tz" << j;
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.id[i] << '\t' << split_name(data.split[i]) << '\t'
        << data.label[i] << '\t' << int(data.speech[i]) << '\t'
        << int(data.gender[i]);
    for (int j = 0; j < data.z.c; ++j) {
      out << '\t' << fmt_float(data.z.data[i * std::size_t(data.z.c) +
                                           std::size_t(j)]);
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

LatentDataset load_latents_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty latent file");
  const auto header = split_tabs(line);
  if (header.size() < 6 || header[0] != "id") {
    throw IoError("unrecognized latent file header");
  }
  const int dim = int(header.size()) - 5;

  LatentDataset data;
  std::vector<float> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (int(cols.size()) != dim + 5) {
      throw IoError("latent row width mismatch");
    }
    data.id.push_back(std::stoi(cols[0]));
    data.split.push_back(parse_split(cols[1]));
    data.label.push_back(std::stoi(cols[2]));
    data.speech.push_back(std::uint8_t(std::stoi(cols[3])));
    data.gender.push_back(std::int8_t(std::stoi(cols[4])));
    for (int j = 0; j < dim; ++j) {
      values.push_back(std::strtof(cols[std::size_t(5 + j)].c_str(), nullptr));
    }
  }
  data.z = nn::Tensor<float>(int(data.id.size()), dim, 1, 1);
  data.z.data = std::move(values);
  return data;
}

ProbeResult train_attacker(const LatentDataset& data, AttackTarget target,
                           const AttackerConfig& config, std::uint64_t seed) {
  std::vector<float> target_all(data.size(), 0.0f);
  std::vector<std::uint8_t> keep(data.size(), 1);
  if (target == AttackTarget::kSpeech) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      target_all[i] = data.speech[i] ? 1.0f : 0.0f;
    }
  } else {
    // Gender is defined only where speech is present.
    for (std::size_t i = 0; i < data.size(); ++i) {
      keep[i] = data.speech[i];
      target_all[i] = data.gender[i] == 1 ? 1.0f : 0.0f;
    }
  }
  nn::Tensor<float> train_z, val_z;
  std::vector<float> train_t, val_t;
  gather_split(data, Split::kTrain, target_all, keep, &train_z, &train_t);
  gather_split(data, Split::kValidation, target_all, keep, &val_z, &val_t);

  TrainConfig probe;
  probe.batch_size = config.batch_size;
  probe.learning_rate = config.learning_rate;
  probe.momentum = config.momentum;
  probe.probe_patience = config.patience;
  probe.probe_max_epochs = config.max_epochs;
  return train_binary_probe(train_z, train_t, val_z, val_t, probe, seed);
}

AggregateReport aggregate_runs(const std::vector<MetricsRecord>& runs) {
  if (runs.empty()) throw DegenerateInputError("no runs to aggregate");
  auto stat = [&](double MetricsRecord::*field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    return AggregateStat{mean_of(v), stdev_of(v)};
  };
  AggregateReport report;
  report.runs = int(runs.size());
  report.sed_accuracy = stat(&MetricsRecord::sed_accuracy);
  report.sad_accuracy = stat(&MetricsRecord::sad_accuracy);
  report.sad_auc = stat(&MetricsRecord::sad_auc);
  report.sad_density_overlap = stat(&MetricsRecord::sad_density_overlap);
  report.gd_accuracy = stat(&MetricsRecord::gd_accuracy);
  report.gd_auc = stat(&MetricsRecord::gd_auc);
  return report;
}

void EvalConfig::validate() const {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (attacker.batch_size < 2 || attacker.batch_size % 2 != 0) {
    throw ConfigError("attacker batch_size must be even and >= 2");
  }
  if (attacker.learning_rate <= 0.0) {
    throw ConfigError("attacker learning_rate must be > 0");
  }
  if (attacker.momentum < 0.0 || attacker.momentum >= 1.0) {
    throw ConfigError("attacker momentum must be in [0, 1)");
  }
  if (attacker.patience < 1 || attacker.max_epochs < 1) {
    throw ConfigError("attacker patience and max_epochs must be >= 1");
  }
}

EvaluationResult evaluate(const fs::path& checkpoint_path,
                          const CorpusManifest& manifest,
                          const EvalConfig& config) {
  config.validate();
  LoadedModel model = load_model(checkpoint_path);

  FrontendConfig frontend;
  frontend.mel_on_magnitude = model.frontend_tag == "melmag";
  std::unique_ptr<MaskNet<float>> mask;
  if (model.method == Method::kRdalM) {
    if (config.mask_checkpoint.empty()) {
      throw ConfigError("checkpoint was trained with masking; "
                        "mask_checkpoint is required");
    }
    mask = load_masknet(config.mask_checkpoint);
  }

  EvaluationResult result;
  result.latents = extract_latent_dataset(model.f.get(), manifest, frontend,
                                          mask.get(), config.cache);
  const LatentDataset& data = result.latents;

  // Test-split views used by every run.
  std::vector<float> zeros(data.size(), 0.0f);
  std::vector<std::uint8_t> all(data.size(), 1);
  nn::Tensor<float> test_z;
  std::vector<float> unused;
  gather_split(data, Split::kTest, zeros, all, &test_z, &unused);

  std::vector<int> test_label, test_speech;
  std::vector<std::uint8_t> speech_only(data.size(), 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    speech_only[i] = data.speech[i];
    if (data.split[i] != Split::kTest) continue;
    test_label.push_back(data.label[i]);
    test_speech.push_back(int(data.speech[i]));
  }
  nn::Tensor<float> test_sp_z;
  std::vector<float> test_sp_gender;
  std::vector<float> gender_all(data.size(), 0.0f);
  for (std::size_t i = 0; i < data.size(); ++i) {
    gender_all[i] = data.gender[i] == 1 ? 1.0f : 0.0f;
  }
  gather_split(data, Split::kTest, gender_all, speech_only, &test_sp_z,
               &test_sp_gender);
  std::vector<int> test_gender(test_sp_gender.begin(), test_sp_gender.end());

  // The checkpoint's own event classifier on the frozen latents; identical
  // across runs.
  double sed_accuracy = 0.0;
  {
    nn::Tensor<float> logits = model.c->forward(test_z, false);
    int hit = 0;
    for (int i = 0; i < logits.n; ++i) {
      const float* row = &logits.data[std::size_t(i) * logits.c];
      const int arg = int(std::max_element(row, row + logits.c) - row);
      if (arg == test_label[std::size_t(i)]) ++hit;
    }
    sed_accuracy = logits.n == 0 ? 0.0 : double(hit) / logits.n;
  }

  for (int r = 0; r < config.runs; ++r) {
    MetricsRecord rec;
    rec.run_seed = mix_seed(config.seed, "attacker", std::uint64_t(r));
    rec.sed_accuracy = sed_accuracy;

    ProbeResult sad = train_attacker(data, AttackTarget::kSpeech,
                                     config.attacker,
                                     mix_seed(rec.run_seed, "sad"));
    const std::vector<double> sad_scores = attacker_scores(sad.net.get(),
                                                           test_z);
    rec.sad_accuracy = binary_accuracy(sad_scores, test_speech);
    rec.sad_auc = auc(sad_scores, test_speech);
    const auto densities = probability_density(sad_scores, test_speech);
    rec.sad_density_overlap = density_overlap(densities.first,
                                              densities.second);

    ProbeResult gd = train_attacker(data, AttackTarget::kGender,
                                    config.attacker,
                                    mix_seed(rec.run_seed, "gd"));
    const std::vector<double> gd_scores = attacker_scores(gd.net.get(),
                                                          test_sp_z);
    rec.gd_accuracy = binary_accuracy(gd_scores, test_gender);
    rec.gd_auc = auc(gd_scores, test_gender);

    result.runs.push_back(rec);
  }
  result.aggregate = aggregate_runs(result.runs);
  return result;
}

void write_metrics_tsv(const fs::path& path,
                       const std::vector<MetricsRecord>& runs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "run_seed\tsed_accuracy\tsad_accuracy\tsad_auc"
         "\tsad_density_overlap\tgd_accuracy\tgd_auc\n";
  for (const auto& r : runs) {
    out << r.run_seed << '\t' << fmt_g17(r.sed_accuracy) << '\t'
        << fmt_g17(r.sad_accuracy) << '\t' << fmt_g17(r.sad_auc) << '\t'
        << fmt_g17(r.sad_density_overlap) << '\t' << fmt_g17(r.gd_accuracy)
        << '\t' << fmt_g17(r.gd_auc) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<MetricsRecord> load_metrics_tsv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_tabs(line).size() != 7) {
    throw IoError("unrecognized metrics file header");
  }
  std::vector<MetricsRecord> runs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() != 7) throw IoError("metrics row width mismatch");
    MetricsRecord r;
    r.run_seed = std::stoull(cols[0]);
    r.sed_accuracy = std::stod(cols[1]);
    r.sad_accuracy = std::stod(cols[2]);
    r.sad_auc = std::stod(cols[3]);
    r.sad_density_overlap = std::stod(cols[4]);
    r.gd_accuracy = std::stod(cols[5]);
    r.gd_auc = std::stod(cols[6]);
    runs.push_back(r);
  }
  return runs;
}

std::string format_report(const std::string& title,
                          const AggregateReport& report) {
  std::string out = "== " + title + " ==\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-22s %8s %8s\n", "metric", "mean", "std");
  out += buf;
  auto row = [&](const char* name, const AggregateStat& s) {
    std::snprintf(buf, sizeof buf, "%-22s %8.4f %8.4f\n", name, s.mean,
                  s.stdev);
    out += buf;
  };
  row("sed_accuracy", report.sed_accuracy);
  row("sad_accuracy", report.sad_accuracy);
  row("sad_auc", report.sad_auc);
  row("sad_density_overlap", report.sad_density_overlap);
  row("gd_accuracy", report.gd_accuracy);
  row("gd_auc", report.gd_auc);
  std::snprintf(buf, sizeof buf, "runs: %d\n", report.runs);
  out += buf;
  return out;
}

void write_roc_tsv(const fs::path& path, const std::vector<RocPoint>& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "fpr\ttpr\n";
  for (const auto& p : curve) {
    out << fmt_g17(p.fpr) << '\t' << fmt_g17(p.tpr) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_density_tsv(const fs::path& path, const DensityCurve& pos,
                       const DensityCurve& neg) {
  if (pos.x.size() != neg.x.size()) {
    throw ShapeError("density curves differ in grid size");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "p\tdensity_speech\tdensity_nonspeech\n";
  for (std::size_t i = 0; i < pos.x.size(); ++i) {
    out << fmt_g17(pos.x[i]) << '\t' << fmt_g17(pos.f[i]) << '\t'
        << fmt_g17(neg.f[i]) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_projection_tsv(const fs::path& path,
                          const std::vector<std::array<double, 2>>& points,
                          const LatentDataset& data) {
  if (points.size() != data.size()) {
    throw ShapeError("projection size differs from dataset size");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id\tsplit\tlabel\tspeech\tgender\tpc1\tpc2\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    out << data.id[i] << '\t' << split_name(data.split[i]) << '\t'
        << data.label[i] << '\t' << int(data.speech[i]) << '\t'
        << int(data.gender[i]) << '\t' << fmt_g17(points[i][0]) << '\t'
        << fmt_g17(points[i][1]) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace rdal
