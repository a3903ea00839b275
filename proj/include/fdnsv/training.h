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

#ifndef FDNSV_TRAINING_H_
#define FDNSV_TRAINING_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "fdnsv/audio.h"
#include "fdnsv/model.h"

namespace fdnsv {

struct AmsGradOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

// AMSGrad with weight decay folded into the gradient:
//   g += wd * theta
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2;  vmax = max(vmax, v)
//   theta -= lr * (m / (1 - b1^t)) / (sqrt(vmax / (1 - b2^t)) + eps)
class AmsGrad {
 public:
  AmsGrad(std::vector<Tensor> params, AmsGradOptions options = {});

  // Reads each parameter's gradient (missing gradients count as zero).
  // Throws before touching any state if a gradient is NaN or infinite.
  void step();
  void zero_grad();

  std::size_t steps() const { return steps_; }
  const AmsGradOptions& options() const { return options_; }
  const std::vector<double>& max_second_moment(std::size_t i) const { return vmax_[i]; }

 private:
  std::vector<Tensor> params_;
  AmsGradOptions options_;
  std::vector<std::vector<double>> m_, v_, vmax_;
  std::size_t steps_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t epochs = 40;
  std::uint64_t seed = 1;
  CropPolicy crop = CropPolicy::kRandom;
  double pre_emphasis = 0.97;
  AmsGradOptions optimizer;
  std::size_t checkpoint_every = 0;  // epochs; 0 disables
  std::string checkpoint_dir;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

struct LabeledWave {
  std::string utterance_id;
  int label = 0;
  Waveform wave;
};

struct TrainingSet {
  std::vector<LabeledWave> items;
  std::vector<std::string> speakers;  // label -> speaker id, sorted
};

TrainingSet load_training_set(const CorpusManifest& manifest);

// One optimizer step over a batch of prepared (cropped, pre-emphasized)
// inputs under one tape; batch norm sees the whole batch, the loss is the
// batch mean. Returns that mean; `correct` receives the argmax hits.
double train_step(FdnNetwork& network, AmsGrad& optimizer,
                  const std::vector<Tensor>& inputs, const std::vector<int>& labels,
                  std::size_t* correct = nullptr);

// Seeded shuffle, crop, pre-emphasis, accumulate, step; one EpochStats per
// epoch. Writes epoch_NNN.ckpt files when checkpointing is configured.
std::vector<EpochStats> train(
    FdnNetwork& network, const TrainingSet& data, const TrainConfig& config,
    const std::function<void(const EpochStats&)>& on_epoch = {});

// `epoch<TAB>mean_loss<TAB>accuracy`, 6 significant digits.
void write_training_log(std::ostream& out, const std::vector<EpochStats>& log);

}  // namespace fdnsv

#endif  // FDNSV_TRAINING_H_
