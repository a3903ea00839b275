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

#ifndef FDNSV_MODEL_H_
#define FDNSV_MODEL_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdnsv/layers.h"
#include "fdnsv/tensor.h"

namespace fdnsv {

enum class Variant { kLight, kHeavy };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& text);

enum class SplitPolicy {
  kSlidingWindow,  // two windows offset by ceil(shift_fraction * T) frames
  kHalves,         // non-overlapping first and second half
};

struct SplitSpec {
  double shift_fraction = 0.5 / 3.69;  // 0.5 s shift over a 3.69 s crop
  SplitPolicy policy = SplitPolicy::kSlidingWindow;

  // Length of each window for a map with `frames` columns (0 if impossible).
  std::size_t window_length(std::size_t frames) const;
};

struct ModelConfig {
  Variant variant = Variant::kLight;
  std::size_t front_channels = 128;
  std::size_t block1_channels = 256;
  std::size_t block0_repeats = 2;
  std::size_t block1_repeats = 4;
  std::size_t alpha = 8;
  std::size_t gru_hidden = 1024;
  std::size_t embedding_dim = 1024;
  std::size_t num_speakers = 6112;
  std::size_t crop_samples = 59049;
  std::size_t channel_divisor = 1;  // shrinks every width for test models
  double leaky_slope = 0.3;
  SplitSpec split;

  // channel_divisor 16, 8 speakers, 3^7-sample crops.
  static ModelConfig tiny(Variant variant = Variant::kLight);

  std::size_t front_width() const { return front_channels / channel_divisor; }
  std::size_t block1_width() const { return block1_channels / channel_divisor; }
  std::size_t gru_width() const { return gru_hidden / channel_divisor; }
  std::size_t embedding_width() const { return embedding_dim / channel_divisor; }
  // Product of all strides and pools: 3 * 3^(block0_repeats + block1_repeats).
  std::size_t total_stride() const;

  // Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

// Squeeze-style attention driven by the difference between the pooled
// ending and beginning windows of a feature map.
struct SeoModule {
  SeoModule() = default;
  // Reduces `channels` to channels/alpha and expands to `out_channels`.
  SeoModule(std::size_t channels, std::size_t out_channels, std::size_t alpha,
            SplitSpec split);

  void collect_parameters(const std::string& prefix, TensorList& out) const;

  Conv1dLayer end_reduce;    // k=1, acts on the pooled ending window
  Conv1dLayer begin_reduce;  // k=1, acts on the pooled beginning window
  Conv1dLayer expand;        // k=1, reduced -> out_channels
  std::size_t alpha = 8;
  SplitSpec split;
};

struct SeoOutput {
  Tensor enhanced;   // channel-reweighted input, same shape
  Tensor attention;  // (C x 1), every entry in (0, 1)
};

// Beginning window f[:, 0:T'] and ending window f[:, T-T':T].
std::pair<Tensor, Tensor> split_feature(const Tensor& f, const SplitSpec& split);

// Channel weights sigmoid(expand(end_reduce(gap(f2)) - begin_reduce(gap(f1)))).
Tensor seo_attention(const Tensor& x, const SeoModule& seo);

SeoOutput seo_forward(const Tensor& x, const SeoModule& seo);

// Hierarchical reweighting given the first stacked convolution's output:
// f * (attention(outer, f) + attention(inner, conv_out)) / 2.
Tensor seo_hierarchical_combine(const Tensor& f, const Tensor& conv_out,
                                const SeoModule& outer, const SeoModule& inner);

// Averages the attention of `outer` (on f) and `inner` (on first_conv(f))
// and reweights f with the mean.
Tensor seo_hierarchical_forward(
    const Tensor& f, const SeoModule& outer, const SeoModule& inner,
    const std::function<Tensor(const Tensor&)>& first_conv);

// SEO (or hierarchical SEO) followed by a pre-activation ResConv, a residual
// connection from the block input and MaxPool(3).
class FdnBlock {
 public:
  FdnBlock() = default;
  FdnBlock(std::size_t in_channels, std::size_t out_channels, Variant variant,
           bool preactivate_input, std::size_t alpha, SplitSpec split,
           double leaky_slope);

  Tensor forward(const Tensor& x, Mode mode);
  // Per-utterance maps; batch norm statistics are shared across the batch.
  std::vector<Tensor> forward(const std::vector<Tensor>& xs, Mode mode);

  // [BN -> LeakyReLU ->] conv_a, the first stacked convolution.
  Tensor first_conv(const Tensor& x, Mode mode, bool update_stats);
  std::vector<Tensor> first_conv(const std::vector<Tensor>& xs, Mode mode,
                                 bool update_stats);

  std::size_t in_channels() const { return conv_a.in_channels(); }
  std::size_t out_channels() const { return conv_b.out_channels(); }

  void collect_parameters(const std::string& prefix, TensorList& out) const;
  void collect_buffers(const std::string& prefix, TensorList& out) const;

  Variant variant = Variant::kLight;
  bool preactivate_input = true;
  double leaky_slope = 0.3;
  SeoModule seo;
  std::optional<SeoModule> inner_seo;  // FDN-H only, reads first_conv output
  std::optional<BatchNorm1d> bn_in;
  Conv1dLayer conv_a;
  BatchNorm1d bn_mid;
  Conv1dLayer conv_b;
  std::optional<Conv1dLayer> skip;  // k=1 projection when channels change
};

Tensor fdn_block_forward(const Tensor& x, FdnBlock& block, Mode mode);

struct ForwardResult {
  Tensor embedding;  // (embedding_dim)
  Tensor logits;     // (num_speakers)
  // front end, end of block0 stage, end of block1 stage, GRU, embedding,
  // logits
  std::vector<Shape> stage_shapes;
};

// Conv(3, stride 3) + BN + LeakyReLU -> block0 x N0 -> block1 x N1 -> GRU ->
// FC embedding -> FC classifier. Tensors alias on copy; construct a new
// network and load state to duplicate one.
class FdnNetwork {
 public:
  // Parameters start at zero; call initialize() or load a checkpoint.
  explicit FdnNetwork(ModelConfig config);

  void initialize(std::uint64_t seed);

  // wave is (1 x T) or (T). T must be >= total_stride() and the front-end
  // output length a multiple of total_stride() / 3.
  ForwardResult forward(const Tensor& wave, Mode mode);
  // Equal-length waveforms; batch norm runs over the whole batch.
  std::vector<ForwardResult> forward(const std::vector<Tensor>& waves, Mode mode);

  const ModelConfig& config() const { return config_; }
  std::size_t min_samples() const { return config_.total_stride(); }

  TensorList parameters() const;
  TensorList buffers() const;
  // parameters() followed by buffers().
  TensorList state() const;
  std::size_t parameter_count() const;

  std::vector<FdnBlock>& blocks() { return blocks_; }
  GruLayer& gru() { return gru_; }
  LinearLayer& embedding_layer() { return embed_; }
  LinearLayer& classifier() { return classifier_; }

 private:
  ModelConfig config_;
  Conv1dLayer front_conv_;
  BatchNorm1d front_bn_;
  std::vector<FdnBlock> blocks_;
  GruLayer gru_;
  LinearLayer embed_;
  LinearLayer classifier_;
};

// Trainable scalars: weights, biases, BN affine terms. Excludes running
// statistics.
std::size_t count_parameters(const ModelConfig& config);

}  // namespace fdnsv

#endif  // FDNSV_MODEL_H_
