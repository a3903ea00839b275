// Copyright 2026 The fdnsv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "fdnsv/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>

#include "fdnsv/checkpoint.h"
#include "fdnsv/ops.h"

namespace fdnsv {

AmsGrad::AmsGrad(std::vector<Tensor> params, AmsGradOptions options)
    : params_(std::move(params)), options_(options) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
    vmax_.emplace_back(p.numel(), 0.0);
  }
}

void AmsGrad::zero_grad() {
  for (Tensor& p : params_) p.clear_grad();
}

void AmsGrad::step() {
  for (const Tensor& p : params_) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bias1 = 1.0 - std::pow(options_.beta1, t);
  const double bias2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const bool has_grad = p.has_grad();
    auto theta = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    auto& vmax = vmax_[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double g = (has_grad ? p.grad()[j] : 0.0) + options_.weight_decay * theta[j];
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
      vmax[j] = std::max(vmax[j], v[j]);
      const double m_hat = m[j] / bias1;
      theta[j] -= options_.lr * m_hat / (std::sqrt(vmax[j] / bias2) + options_.eps);
    }
  }
}

TrainingSet load_training_set(const CorpusManifest& manifest) {
  validate_manifest(manifest);
  TrainingSet set;
  std::map<std::string, int> labels;
  for (const ManifestEntry& e : manifest) labels.emplace(e.speaker_id, 0);
  int next = 0;
  for (auto& [speaker, label] : labels) {
    label = next++;
    set.speakers.push_back(speaker);
  }
  for (const ManifestEntry& e : manifest) {
    set.items.push_back({e.utterance_id, labels.at(e.speaker_id), read_wav(e.path)});
  }
  return set;
}

double train_step(FdnNetwork& network, AmsGrad& optimizer,
                  const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                  std::size_t* correct) {
  if (inputs.empty() || inputs.size() != labels.size()) {
    throw std::invalid_argument("train_step: need one label per input");
  }
  optimizer.zero_grad();
  Tape tape;
  std::vector<ForwardResult> outs = network.forward(inputs, Mode::kTrain);
  std::vector<Tensor> logits;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    logits.push_back(outs[i].logits);
    auto z = outs[i].logits.data();
    const auto best = std::max_element(z.begin(), z.end()) - z.begin();
    if (best == labels[i]) ++hits;
  }
  Tensor loss = ops::softmax_cross_entropy(ops::stack(logits), labels);
  const double value = loss.item();
  tape.backward(loss);
  optimizer.step();
  if (correct != nullptr) *correct = hits;
  return value;
}

std::vector<EpochStats> train(FdnNetwork& network, const TrainingSet& data,
                              const TrainConfig& config,
                              const std::function<void(const EpochStats&)>& on_epoch) {
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (data.items.empty()) throw std::invalid_argument("training set is empty");
  if (data.speakers.size() != network.config().num_speakers) {
    throw std::invalid_argument(
        "corpus has " + std::to_string(data.speakers.size()) +
        " speakers but the model classifies " +
        std::to_string(network.config().num_speakers));
  }
  for (const LabeledWave& item : data.items) {
    if (item.label < 0 ||
        static_cast<std::size_t>(item.label) >= network.config().num_speakers) {
      throw std::invalid_argument("label out of range for " + item.utterance_id);
    }
  }

  std::vector<Tensor> params;
  for (const NamedTensor& p : network.parameters()) params.push_back(p.tensor);
  AmsGrad optimizer(params, config.optimizer);
  SplitMix64 rng(config.seed);
  const std::size_t crop = network.config().crop_samples;

  std::vector<std::size_t> order(data.items.size());
  std::vector<EpochStats> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> inputs;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        const LabeledWave& item = data.items[order[k]];
        Waveform w = pre_emphasis(crop_or_pad(item.wave, crop, config.crop, rng),
                                  config.pre_emphasis);
        inputs.emplace_back(Shape{1, crop}, std::move(w.samples));
        labels.push_back(item.label);
      }
      std::size_t batch_hits = 0;
      const double loss = train_step(network, optimizer, inputs, labels, &batch_hits);
      loss_sum += loss * static_cast<double>(inputs.size());
      hits += batch_hits;
    }
    const double n = static_cast<double>(order.size());
    EpochStats stats{epoch, loss_sum / n, static_cast<double>(hits) / n};
    log.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
        epoch % config.checkpoint_every == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%03zu.ckpt", epoch);
      save_checkpoint((std::filesystem::path(config.checkpoint_dir) / name).string(),
                      network);
    }
  }
  return log;
}

void write_training_log(std::ostream& out, const std::vector<EpochStats>& log) {
  char buf[96];
  for (const EpochStats& s : log) {
    std::snprintf(buf, sizeof(buf), "%zu\t%.6g\t%.6g\n", s.epoch, s.mean_loss,
                  s.accuracy);
    out << buf;
  }
}

}  // namespace fdnsv
