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

#include "rdal/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rdal {
namespace {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Index batches with an equal number of positives and negatives; partial
// batches are dropped.
std::vector<std::vector<int>> balanced_batches(std::vector<int> pos,
                                               std::vector<int> neg,
                                               int batch_size,
                                               std::mt19937_64* rng) {
  std::shuffle(pos.begin(), pos.end(), *rng);
  std::shuffle(neg.begin(), neg.end(), *rng);
  const std::size_t half = std::size_t(batch_size) / 2;
  std::vector<std::vector<int>> batches;
  std::size_t p = 0, q = 0;
  while (p + half <= pos.size() && q + half <= neg.size()) {
    std::vector<int> batch;
    batch.reserve(2 * half);
    for (std::size_t i = 0; i < half; ++i) batch.push_back(pos[p++]);
    for (std::size_t i = 0; i < half; ++i) batch.push_back(neg[q++]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

nn::Tensor<float> gather_rows(const nn::Tensor<float>& z,
                              const std::vector<int>& idx) {
  nn::Tensor<float> out(int(idx.size()), z.c, 1, 1);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(&z.data[std::size_t(idx[i]) * z.c], z.c,
                &out.data[i * std::size_t(z.c)]);
  return out;
}

double binary_accuracy(const nn::Tensor<float>& probs,
                       const std::vector<float>& targets) {
  int hit = 0;
  for (int i = 0; i < probs.n; ++i)
    if ((probs.data[i] >= 0.5f) == (targets[i] >= 0.5f)) ++hit;
  return probs.n == 0 ? 0.0 : double(hit) / probs.n;
}

// Mean binary cross entropy of a probe over a full latent set.
double probe_loss(nn::Sequential<float>* net, const nn::Tensor<float>& z,
                  const std::vector<float>& t, double* accuracy) {
  nn::Tensor<float> logits = net->forward(z, false);
  nn::Tensor<float> probs;
  const double loss = bce_with_logits<float>(logits, t, &probs, nullptr);
  if (accuracy) *accuracy = binary_accuracy(probs, t);
  return loss;
}

void copy_params(const std::vector<nn::NamedParam<float>>& src,
                 const std::vector<nn::NamedParam<float>>& dst) {
  if (src.size() != dst.size())
    throw Error("copy_params: parameter lists differ");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name ||
        src[i].value->size() != dst[i].value->size())
      throw Error("copy_params: mismatch at " + src[i].name);
    *dst[i].value = *src[i].value;
  }
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kBaseline: return "baseline";
    case Method::kNaiveAdv: return "naive_adv";
    case Method::kRdal: return "rdal";
    case Method::kRdalM: return "rdal_m";
  }
  throw ConfigError("method_name: unknown method");
}

Method parse_method(const std::string& name) {
  if (name == "baseline") return Method::kBaseline;
  if (name == "naive_adv") return Method::kNaiveAdv;
  if (name == "rdal") return Method::kRdal;
  if (name == "rdal_m") return Method::kRdalM;
  throw ConfigError("unknown method: " + name);
}

void TrainConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (batch_size < 2 || batch_size % 2 != 0)
    throw ConfigError("batch_size must be even and >= 2");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("momentum must be in [0, 1)");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (tau < 1) throw ConfigError("tau must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (probe_patience < 1 || probe_max_epochs < 1)
    throw ConfigError("probe settings must be >= 1");
  for (int w : conv_widths)
    if (w < 1) throw ConfigError("conv widths must be >= 1");
  if (method == Method::kRdalM && mask_checkpoint.empty())
    throw ConfigError("method rdal_m requires mask_checkpoint");
}

SplitData prepare_split(const CorpusManifest& manifest, Split split,
                        const FrontendConfig& frontend, MaskNet<float>* mask,
                        const FeatureCache* cache) {
  SplitData out;
  for (const auto& ex : manifest.examples) {
    if (ex.split != split) continue;
    FeatureMatrix feat;
    if (cache == nullptr || !cache->load(ex.id, &feat)) {
      AudioSegment seg = load_segment(manifest, ex.mixture_path);
      MagnitudeSpectrogram spec = stft_magnitude(seg);
      if (mask != nullptr) spec = mask_apply(spec, mask);
      feat = log_mel(spec, frontend);
      if (cache != nullptr) cache->store(ex.id, feat);
    }
    out.x.push_back(std::move(feat));
    out.label.push_back(ex.event_class - 1);
    out.speech.push_back(ex.has_speech ? 1 : 0);
    out.gender.push_back(!ex.has_speech ? std::int8_t(-1)
                         : ex.speaker_gender == Gender::kMale
                             ? std::int8_t(0)
                             : std::int8_t(1));
  }
  return out;
}

BalancedBatcher::BalancedBatcher(const SplitData& data, int batch_size)
    : batch_size_(batch_size) {
  for (std::size_t i = 0; i < data.size(); ++i)
    (data.speech[i] ? speech_idx_ : nonspeech_idx_).push_back(int(i));
}

std::vector<std::vector<int>> BalancedBatcher::epoch_batches(
    std::mt19937_64* rng) const {
  return balanced_batches(speech_idx_, nonspeech_idx_, batch_size_, rng);
}

int BalancedBatcher::batches_per_epoch() const {
  const std::size_t half = std::size_t(batch_size_) / 2;
  return int(std::min(speech_idx_.size(), nonspeech_idx_.size()) / half);
}

Batch BalancedBatcher::gather(const SplitData& data,
                              const std::vector<int>& idx) const {
  if (idx.empty()) throw Error("gather: empty batch");
  const FeatureMatrix& first = data.x[idx[0]];
  Batch b{nn::Tensor<float>(int(idx.size()), 1, first.rows, first.cols),
          {}, {}};
  const std::size_t plane = std::size_t(first.rows) * first.cols;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const FeatureMatrix& m = data.x[idx[i]];
    if (m.rows != first.rows || m.cols != first.cols)
      throw ShapeError("gather: inconsistent feature shapes");
    std::copy_n(m.values.data(), plane, &b.x.data[i * plane]);
    b.label.push_back(data.label[idx[i]]);
    b.speech.push_back(float(data.speech[idx[i]]));
  }
  return b;
}

nn::Tensor<float> extract_latents(nn::Module<float>* f, const SplitData& data,
                                  int batch_size) {
  if (data.size() == 0) throw Error("extract_latents: empty split");
  const int rows = data.x[0].rows, cols = data.x[0].cols;
  const std::size_t plane = std::size_t(rows) * cols;
  nn::Tensor<float> out(int(data.size()), kLatentDim, 1, 1);
  for (std::size_t start = 0; start < data.size();
       start += std::size_t(batch_size)) {
    const std::size_t n = std::min(std::size_t(batch_size),
                                   data.size() - start);
    nn::Tensor<float> x(int(n), 1, rows, cols);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(data.x[start + i].values.data(), plane, &x.data[i * plane]);
    nn::Tensor<float> z = f->forward(x, false);
    z.require_shape(int(n), kLatentDim, 1, 1, "extract_latents");
    std::copy_n(z.data.data(), n * kLatentDim,
                &out.data[start * kLatentDim]);
  }
  return out;
}

ProbeResult train_binary_probe(const nn::Tensor<float>& train_z,
                               const std::vector<float>& train_t,
                               const nn::Tensor<float>& val_z,
                               const std::vector<float>& val_t,
                               const TrainConfig& config,
                               std::uint64_t init_seed) {
  if (train_z.n != int(train_t.size()) || val_z.n != int(val_t.size()))
    throw ShapeError("train_binary_probe: target count mismatch");
  std::vector<int> pos, neg;
  for (int i = 0; i < train_z.n; ++i)
    (train_t[i] >= 0.5f ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw DegenerateInputError(
        "train_binary_probe: both target values required");

  std::mt19937_64 init_rng(init_seed);
  ProbeResult result;
  result.net = build_speech_classifier<float>(&init_rng);
  auto params = nn::collect_params(result.net.get(), "D");
  nn::Sgd<float> opt(params, config.learning_rate, config.momentum);

  // Small latent sets cannot fill batch_size/2 per class; shrink the batch
  // rather than skipping training.
  const int half = int(std::min({std::size_t(config.batch_size) / 2,
                                 pos.size(), neg.size()}));
  const int batch = 2 * half;

  Checkpoint best;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.probe_max_epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(init_seed, "probe-shuffle", epoch));
    for (const auto& idx : balanced_batches(pos, neg, batch, &shuffle_rng)) {
      nn::Tensor<float> x = gather_rows(train_z, idx);
      std::vector<float> t;
      t.reserve(idx.size());
      for (int i : idx) t.push_back(train_t[i]);
      opt.zero_grad();
      nn::Tensor<float> logits = result.net->forward(x, true);
      nn::Tensor<float> grad;
      bce_with_logits<float>(logits, t, nullptr, &grad);
      result.net->backward(grad);
      opt.step();
    }
    const double val_loss = probe_loss(result.net.get(), val_z, val_t,
                                       nullptr);
    if (!std::isfinite(val_loss))
      throw Error("train_binary_probe: non-finite validation loss at epoch " +
                  std::to_string(epoch));
    result.epochs = epoch;
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = Checkpoint{};
      store_params(params, &best);
      since_best = 0;
    } else if (++since_best >= config.probe_patience) {
      break;
    }
  }
  load_params(best, params);
  result.val_loss = probe_loss(result.net.get(), val_z, val_t,
                               &result.val_accuracy);
  return result;
}

Trainer::Trainer(const TrainConfig& config, SplitData train, SplitData val)
    : config_(config), train_(std::move(train)), val_(std::move(val)),
      batcher_(train_, config.batch_size) {
  config_.validate();
  if (train_.size() == 0 || val_.size() == 0)
    throw Error("Trainer: empty split");
  if (batcher_.batches_per_epoch() == 0)
    throw ConfigError("Trainer: batch_size exceeds the balanced split size");
  std::mt19937_64 rng_f = make_rng(config_.seed, "init-f");
  std::mt19937_64 rng_c = make_rng(config_.seed, "init-c");
  f_ = build_feature_extractor<float>(config_.conv_widths, &rng_f);
  c_ = build_event_classifier<float>(config_.num_classes, &rng_c);
  opt_f_ = std::make_unique<nn::Sgd<float>>(nn::collect_params(f_.get(), "F"),
                                            config_.learning_rate,
                                            config_.momentum);
  opt_c_ = std::make_unique<nn::Sgd<float>>(nn::collect_params(c_.get(), "C"),
                                            config_.learning_rate,
                                            config_.momentum);
  if (has_adversary()) {
    std::mt19937_64 rng_d = make_rng(config_.seed, "init-d");
    d_ = build_speech_classifier<float>(&rng_d);
    opt_d_ = std::make_unique<nn::Sgd<float>>(
        nn::collect_params(d_.get(), "D"), config_.learning_rate,
        config_.momentum);
  }
}

LossBundle Trainer::train_step(const Batch& batch, double lambda) {
  opt_f_->zero_grad();
  opt_c_->zero_grad();
  if (opt_d_) opt_d_->zero_grad();

  nn::Tensor<float> z = f_->forward(batch.x, true);
  nn::Tensor<float> c_logits = c_->forward(z, true);
  LossBundle losses;
  nn::Tensor<float> g_c_logits;
  losses.loss_cls = softmax_ce_with_logits<float>(c_logits, batch.label,
                                                  nullptr, &g_c_logits);
  nn::Tensor<float> g_z = c_->backward(g_c_logits);

  if (has_adversary()) {
    nn::Tensor<float> d_logits = d_->forward(grl_forward(z), true);
    nn::Tensor<float> g_d_logits;
    losses.loss_adv = bce_with_logits<float>(d_logits, batch.speech, nullptr,
                                             &g_d_logits);
    // theta_F sees dL_cls/dtheta_F - lambda * dL_adv/dtheta_F.
    nn::Tensor<float> g_z_adv = grl_backward(d_->backward(g_d_logits), lambda);
    for (std::size_t i = 0; i < g_z.data.size(); ++i)
      g_z.data[i] += g_z_adv.data[i];
  }
  f_->backward(g_z);

  opt_c_->step();
  if (opt_d_) opt_d_->step();
  opt_f_->step();
  return losses;
}

ProbeResult Trainer::retrain_probe(int cycle_index) {
  nn::Tensor<float> train_z = extract_latents(f_.get(), train_,
                                              config_.batch_size);
  nn::Tensor<float> val_z = extract_latents(f_.get(), val_,
                                            config_.batch_size);
  std::vector<float> train_t(train_.speech.begin(), train_.speech.end());
  std::vector<float> val_t(val_.speech.begin(), val_.speech.end());
  const std::uint64_t init_seed =
      config_.probe_fresh_init
          ? mix_seed(config_.seed, "probe-init", cycle_index)
          : mix_seed(config_.seed, "probe-init", 0);
  return train_binary_probe(train_z, train_t, val_z, val_t, config_,
                            init_seed);
}

void Trainer::swap_probe(const nn::Sequential<float>& probe) {
  if (!d_) throw Error("swap_probe: method has no speech classifier");
  auto src = nn::collect_params(
      const_cast<nn::Sequential<float>*>(&probe), "D");
  auto dst = nn::collect_params(d_.get(), "D");
  copy_params(src, dst);
  opt_d_->reset_velocity();
}

double Trainer::validation_loss_cls() {
  double total = 0.0;
  std::size_t count = 0;
  const int rows = val_.x[0].rows, cols = val_.x[0].cols;
  const std::size_t plane = std::size_t(rows) * cols;
  for (std::size_t start = 0; start < val_.size();
       start += std::size_t(config_.batch_size)) {
    const std::size_t n = std::min(std::size_t(config_.batch_size),
                                   val_.size() - start);
    nn::Tensor<float> x(int(n), 1, rows, cols);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy_n(val_.x[start + i].values.data(), plane, &x.data[i * plane]);
      labels[i] = val_.label[start + i];
    }
    nn::Tensor<float> logits = c_->forward(f_->forward(x, false), false);
    total += softmax_ce_with_logits(logits, labels) * double(n);
    count += n;
  }
  return total / double(count);
}

Checkpoint Trainer::snapshot(int epoch, double lambda) const {
  Checkpoint ck;
  ck.meta["format"] = "rdal-train";
  ck.meta["method"] = method_name(config_.method);
  ck.meta["epoch"] = std::to_string(epoch);
  ck.meta["lambda"] = format_double(lambda);
  ck.meta["tau"] = std::to_string(config_.tau);
  ck.meta["seed"] = std::to_string(config_.seed);
  ck.meta["num_classes"] = std::to_string(config_.num_classes);
  std::string widths;
  for (int w : config_.conv_widths) {
    if (!widths.empty()) widths += ',';
    widths += std::to_string(w);
  }
  ck.meta["conv_widths"] = widths;
  ck.meta["frontend"] = config_.frontend.tag();
  store_params(nn::collect_params(f_.get(), "F"), &ck);
  store_params(nn::collect_params(c_.get(), "C"), &ck);
  store_params(opt_f_->state(), &ck);
  store_params(opt_c_->state(), &ck);
  if (d_) {
    store_params(nn::collect_params(d_.get(), "D"), &ck);
    store_params(opt_d_->state(), &ck);
  }
  return ck;
}

void Trainer::restore(const Checkpoint& ck) {
  load_params(ck, nn::collect_params(f_.get(), "F"));
  load_params(ck, nn::collect_params(c_.get(), "C"));
  load_params(ck, opt_f_->state());
  load_params(ck, opt_c_->state());
  if (d_) {
    load_params(ck, nn::collect_params(d_.get(), "D"));
    load_params(ck, opt_d_->state());
  }
}

FitResult Trainer::fit(const fs::path& out_dir) {
  fs::create_directories(out_dir);
  FitResult result;
  result.log_path = out_dir / "train_log.tsv";
  std::ofstream log(result.log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + result.log_path.string());
  log << "epoch\tlambda\tloss_cls\tloss_adv\tval_loss_cls\tprobe_val_lsp"
         "\tprobe_val_acc\td_val_acc\n";

  // RDAL variants keep the checkpoint whose converged probe loss is highest;
  // the others keep the lowest validation classification loss.
  const bool maximize = has_probe_cycles();
  double best = maximize ? -std::numeric_limits<double>::infinity()
                         : std::numeric_limits<double>::infinity();
  Checkpoint best_ck;
  bool have_best = false;
  int cycles_since_best = 0;

  for (int epoch = 1; epoch <= config_.max_epochs; ++epoch) {
    const double lambda =
        has_adversary() ? lambda_schedule(epoch - 1, config_.max_epochs,
                                          config_.warmup_epochs, config_.gamma)
                        : 0.0;
    std::mt19937_64 shuffle_rng(mix_seed(config_.seed, "shuffle", epoch));
    double sum_cls = 0.0, sum_adv = 0.0;
    int batches = 0;
    for (const auto& idx : batcher_.epoch_batches(&shuffle_rng)) {
      const LossBundle l = train_step(batcher_.gather(train_, idx), lambda);
      if (!std::isfinite(l.loss_cls) || !std::isfinite(l.loss_adv))
        throw Error("fit: non-finite loss at epoch " + std::to_string(epoch) +
                    " (method " + method_name(config_.method) + ", L_cls " +
                    format_double(l.loss_cls) + ", L_adv " +
                    format_double(l.loss_adv) + ")");
      sum_cls += l.loss_cls;
      sum_adv += l.loss_adv;
      ++batches;
    }
    result.epochs_run = epoch;
    const double mean_cls = sum_cls / batches;
    const double mean_adv = sum_adv / batches;

    std::string val_col, lsp_col, acc_col, d_acc_col;
    if (epoch % config_.tau == 0) {
      double score;
      if (has_probe_cycles()) {
        ProbeResult probe = retrain_probe(epoch / config_.tau);
        swap_probe(*probe.net);
        score = probe.val_loss;
        lsp_col = format_double(probe.val_loss);
        acc_col = format_double(probe.val_accuracy);
      } else {
        score = validation_loss_cls();
        val_col = format_double(score);
      }
      if (has_adversary()) {
        // Validation accuracy of the speech classifier currently in the
        // loop: the jointly trained one for naive_adv, the freshly swapped
        // probe for the rdal variants.
        nn::Tensor<float> val_z = extract_latents(f_.get(), val_,
                                                  config_.batch_size);
        std::vector<float> val_t(val_.speech.begin(), val_.speech.end());
        double d_acc = 0.0;
        probe_loss(d_.get(), val_z, val_t, &d_acc);
        d_acc_col = format_double(d_acc);
      }
      const Checkpoint ck = snapshot(epoch, lambda);
      save_checkpoint(out_dir / ("cycle_" + std::to_string(epoch) + ".ckpt"),
                      ck);
      const bool improved = maximize ? score > best : score < best;
      if (improved || !have_best) {
        best = score;
        best_ck = ck;
        have_best = true;
        result.best_epoch = epoch;
        result.best_score = score;
        cycles_since_best = 0;
      } else {
        ++cycles_since_best;
      }
    }
    log << epoch << '\t' << format_double(lambda) << '\t'
        << format_double(mean_cls) << '\t' << format_double(mean_adv) << '\t'
        << val_col << '\t' << lsp_col << '\t' << acc_col << '\t' << d_acc_col
        << '\n';
    if (cycles_since_best >= config_.patience) break;
  }
  log.flush();

  if (!have_best) {
    best_ck = snapshot(result.epochs_run, 0.0);
    result.best_epoch = result.epochs_run;
  } else {
    restore(best_ck);
  }
  result.best_checkpoint = out_dir / "best.ckpt";
  save_checkpoint(result.best_checkpoint, best_ck);
  return result;
}

// -- Mask pre-training ---------------------------------------------------------

namespace {

struct MaskPairs {
  std::vector<MagnitudeSpectrogram> mix, event;
};

MaskPairs load_mask_pairs(const CorpusManifest& manifest, Split split) {
  MaskPairs out;
  for (const auto& ex : manifest.examples) {
    if (ex.split != split) continue;
    if (ex.event_path.empty())
      throw Error("pretrain_masknet: event-only targets unavailable");
    out.mix.push_back(stft_magnitude(load_segment(manifest, ex.mixture_path)));
    out.event.push_back(
        stft_magnitude(load_segment(manifest, ex.event_path)));
  }
  if (out.mix.empty()) throw Error("pretrain_masknet: empty split");
  return out;
}

nn::Tensor<float> stack_specs(const MaskPairs& pairs,
                              const std::vector<int>& idx, bool event) {
  const auto& src = event ? pairs.event : pairs.mix;
  const int rows = src[0].rows, cols = src[0].cols;
  const std::size_t plane = std::size_t(rows) * cols;
  nn::Tensor<float> out(int(idx.size()), 1, rows, cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(src[idx[i]].values.data(), plane, &out.data[i * plane]);
  return out;
}

// Mean squared error and its gradient w.r.t. the prediction.
double mse_loss(const nn::Tensor<float>& pred, const nn::Tensor<float>& target,
                nn::Tensor<float>* grad_out) {
  if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
  double total = 0.0;
  if (grad_out) *grad_out = pred;
  const double inv = 1.0 / double(pred.data.size());
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = double(pred.data[i]) - double(target.data[i]);
    total += d * d;
    if (grad_out) grad_out->data[i] = float(2.0 * d * inv);
  }
  return total * inv;
}

double eval_mask_mse(MaskNet<float>* net, const MaskPairs& pairs,
                     int batch_size, bool identity) {
  double total = 0.0;
  std::size_t count = 0;
  std::vector<int> idx(pairs.mix.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
  for (std::size_t start = 0; start < idx.size();
       start += std::size_t(batch_size)) {
    const std::size_t n = std::min(std::size_t(batch_size),
                                   idx.size() - start);
    std::vector<int> chunk(idx.begin() + start, idx.begin() + start + n);
    nn::Tensor<float> x = stack_specs(pairs, chunk, false);
    nn::Tensor<float> t = stack_specs(pairs, chunk, true);
    nn::Tensor<float> y = identity ? x : net->forward(x, false);
    total += mse_loss(y, t, nullptr) * double(n);
    count += n;
  }
  return total / double(count);
}

}  // namespace

MaskTrainResult pretrain_masknet(const CorpusManifest& manifest,
                                 const MaskTrainConfig& config,
                                 const fs::path& out_path) {
  MaskPairs train = load_mask_pairs(manifest, Split::kTrain);
  MaskPairs val = load_mask_pairs(manifest, Split::kValidation);
  const int rows = train.mix[0].rows, cols = train.mix[0].cols;

  std::mt19937_64 init_rng = make_rng(config.seed, "init-mask");
  MaskNet<float> net(config.base, rows, cols, &init_rng);
  auto params = nn::collect_params(&net, "mask");
  nn::Sgd<float> opt(params, config.learning_rate, config.momentum);

  MaskTrainResult result;
  result.unmasked_mse = eval_mask_mse(&net, val, config.batch_size, true);

  Checkpoint best;
  double best_mse = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<int> order(train.mix.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::mt19937_64 rng = make_rng(config.seed, "mask-shuffle", epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + config.batch_size <= order.size();
         start += std::size_t(config.batch_size)) {
      std::vector<int> idx(order.begin() + start,
                           order.begin() + start + config.batch_size);
      nn::Tensor<float> x = stack_specs(train, idx, false);
      nn::Tensor<float> t = stack_specs(train, idx, true);
      opt.zero_grad();
      nn::Tensor<float> y = net.forward(x, true);
      nn::Tensor<float> grad;
      const double loss = mse_loss(y, t, &grad);
      if (!std::isfinite(loss))
        throw Error("pretrain_masknet: non-finite loss at epoch " +
                    std::to_string(epoch));
      net.backward(grad);
      opt.step();
    }
    const double val_mse = eval_mask_mse(&net, val, config.batch_size, false);
    result.epochs = epoch;
    if (val_mse < best_mse) {
      best_mse = val_mse;
      best = Checkpoint{};
      store_params(params, &best);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  load_params(best, params);
  result.val_mse = best_mse;

  best.meta["format"] = "rdal-mask";
  best.meta["base"] = std::to_string(config.base);
  best.meta["rows"] = std::to_string(rows);
  best.meta["cols"] = std::to_string(cols);
  best.meta["val_mse"] = format_double(result.val_mse);
  best.meta["unmasked_mse"] = format_double(result.unmasked_mse);
  save_checkpoint(out_path, best);
  return result;
}

std::unique_ptr<MaskNet<float>> load_masknet(const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.count("format") == 0 || ck.meta.at("format") != "rdal-mask")
    throw IoError("not a mask checkpoint: " + path.string());
  const int base = std::stoi(ck.meta.at("base"));
  const int rows = std::stoi(ck.meta.at("rows"));
  const int cols = std::stoi(ck.meta.at("cols"));
  std::mt19937_64 rng = make_rng(0, "mask-load");
  auto net = std::make_unique<MaskNet<float>>(base, rows, cols, &rng);
  load_params(ck, nn::collect_params(net.get(), "mask"));
  return net;
}

}  // namespace rdal
