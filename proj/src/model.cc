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

#include "fdnsv/model.h"

#include <cmath>
#include <stdexcept>

#include "fdnsv/ops.h"
#include "fdnsv/rng.h"

namespace fdnsv {

std::string to_string(Variant variant) {
  return variant == Variant::kLight ? "light" : "heavy";
}

Variant parse_variant(const std::string& text) {
  if (text == "light" || text == "L") return Variant::kLight;
  if (text == "heavy" || text == "H") return Variant::kHeavy;
  throw std::invalid_argument("unknown variant '" + text +
                              "' (expected light or heavy)");
}

std::size_t SplitSpec::window_length(std::size_t frames) const {
  if (policy == SplitPolicy::kHalves) return frames / 2;
  const auto shift = static_cast<std::size_t>(
      std::ceil(shift_fraction * static_cast<double>(frames)));
  return shift >= frames ? 0 : frames - shift;
}

ModelConfig ModelConfig::tiny(Variant variant) {
  ModelConfig config;
  config.variant = variant;
  config.channel_divisor = 16;
  config.num_speakers = 8;
  config.crop_samples = 2187;
  return config;
}

std::size_t ModelConfig::total_stride() const {
  std::size_t stride = 3;
  for (std::size_t i = 0; i < block0_repeats + block1_repeats; ++i) stride *= 3;
  return stride;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid model config: " + what);
  };
  if (channel_divisor < 1) fail("channel_divisor must be >= 1");
  if (alpha < 1) fail("alpha must be >= 1");
  for (auto [name, value] :
       {std::pair{"front_channels", front_channels},
        std::pair{"block1_channels", block1_channels},
        std::pair{"gru_hidden", gru_hidden},
        std::pair{"embedding_dim", embedding_dim}}) {
    if (value % channel_divisor != 0 || value / channel_divisor == 0) {
      fail(std::string(name) + " not divisible by channel_divisor");
    }
  }
  if (front_width() % alpha != 0 || block1_width() % alpha != 0) {
    fail("channel widths must be divisible by alpha");
  }
  if (block0_repeats < 1 || block1_repeats < 1) fail("repeats must be >= 1");
  if (num_speakers < 2) fail("num_speakers must be >= 2");
  if (crop_samples < total_stride() || crop_samples % total_stride() != 0) {
    fail("crop_samples must be a positive multiple of " +
         std::to_string(total_stride()));
  }
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
  if (split.policy == SplitPolicy::kSlidingWindow &&
      !(split.shift_fraction > 0.0 && split.shift_fraction < 1.0)) {
    fail("shift_fraction must lie in (0, 1)");
  }
}

SeoModule::SeoModule(std::size_t channels, std::size_t out_channels,
                     std::size_t alpha, SplitSpec split)
    : alpha(alpha), split(split) {
  if (alpha < 1 || channels % alpha != 0) {
    throw std::invalid_argument("seo: channels " + std::to_string(channels) +
                                " not divisible by alpha " +
                                std::to_string(alpha));
  }
  const std::size_t reduced = channels / alpha;
  end_reduce = Conv1dLayer(channels, reduced, 1);
  begin_reduce = Conv1dLayer(channels, reduced, 1);
  expand = Conv1dLayer(reduced, out_channels, 1);
}

void SeoModule::collect_parameters(const std::string& prefix,
                                   TensorList& out) const {
  end_reduce.collect_parameters(prefix + ".end_reduce", out);
  begin_reduce.collect_parameters(prefix + ".begin_reduce", out);
  expand.collect_parameters(prefix + ".expand", out);
}

std::pair<Tensor, Tensor> split_feature(const Tensor& f, const SplitSpec& split) {
  if (f.rank() != 2) throw std::invalid_argument("split_feature: expected C x T");
  const std::size_t frames = f.dim(1);
  const std::size_t window = split.window_length(frames);
  if (window < 1) {
    throw std::invalid_argument("feature too short for split (T=" +
                                std::to_string(frames) + ")");
  }
  return {ops::slice_time(f, 0, window),
          ops::slice_time(f, frames - window, window)};
}

Tensor seo_attention(const Tensor& x, const SeoModule& seo) {
  auto [begin, end] = split_feature(x, seo.split);
  Tensor pooled_begin = ops::global_avg_pool(begin);
  Tensor pooled_end = ops::global_avg_pool(end);
  Tensor diff = ops::sub(seo.end_reduce.forward(pooled_end),
                         seo.begin_reduce.forward(pooled_begin));
  return ops::sigmoid(seo.expand.forward(diff));
}

SeoOutput seo_forward(const Tensor& x, const SeoModule& seo) {
  if (seo.expand.out_channels() != x.dim(0)) {
    throw std::invalid_argument("seo: channel mismatch between attention (" +
                                std::to_string(seo.expand.out_channels()) +
                                ") and input (" + std::to_string(x.dim(0)) + ")");
  }
  Tensor attention = seo_attention(x, seo);
  return {ops::channel_scale(x, attention), attention};
}

Tensor seo_hierarchical_combine(const Tensor& f, const Tensor& conv_out,
                                const SeoModule& outer, const SeoModule& inner) {
  const std::size_t channels = f.dim(0);
  if (outer.expand.out_channels() != channels ||
      inner.expand.out_channels() != channels) {
    throw std::invalid_argument(
        "hierarchical seo: channel mismatch, both attentions must emit " +
        std::to_string(channels) + " channels");
  }
  Tensor outer_attention = seo_attention(f, outer);
  Tensor inner_attention = seo_attention(conv_out, inner);
  Tensor mean_attention =
      ops::scale(ops::add(outer_attention, inner_attention), 0.5);
  return ops::channel_scale(f, mean_attention);
}

Tensor seo_hierarchical_forward(
    const Tensor& f, const SeoModule& outer, const SeoModule& inner,
    const std::function<Tensor(const Tensor&)>& first_conv) {
  return seo_hierarchical_combine(f, first_conv(f), outer, inner);
}

FdnBlock::FdnBlock(std::size_t in_channels, std::size_t out_channels,
                   Variant variant, bool preactivate_input, std::size_t alpha,
                   SplitSpec split, double leaky_slope)
    : variant(variant),
      preactivate_input(preactivate_input),
      leaky_slope(leaky_slope),
      seo(in_channels, in_channels, alpha, split),
      conv_a(in_channels, out_channels, 3, 1, 1),
      bn_mid(out_channels),
      conv_b(out_channels, out_channels, 3, 1, 1) {
  if (variant == Variant::kHeavy) {
    inner_seo.emplace(out_channels, in_channels, alpha, split);
  }
  if (preactivate_input) bn_in.emplace(in_channels);
  if (in_channels != out_channels) skip.emplace(in_channels, out_channels, 1);
}

Tensor FdnBlock::first_conv(const Tensor& x, Mode mode, bool update_stats) {
  return first_conv(std::vector<Tensor>{x}, mode, update_stats)[0];
}

std::vector<Tensor> FdnBlock::first_conv(const std::vector<Tensor>& xs, Mode mode,
                                         bool update_stats) {
  std::vector<Tensor> out;
  if (!preactivate_input) {
    for (const Tensor& x : xs) out.push_back(conv_a.forward(x));
    return out;
  }
  for (const Tensor& h : bn_in->forward(xs, mode, update_stats)) {
    out.push_back(conv_a.forward(ops::leaky_relu(h, leaky_slope)));
  }
  return out;
}

Tensor FdnBlock::forward(const Tensor& x, Mode mode) {
  return forward(std::vector<Tensor>{x}, mode)[0];
}

std::vector<Tensor> FdnBlock::forward(const std::vector<Tensor>& xs, Mode mode) {
  for (const Tensor& x : xs) {
    if (x.rank() != 2 || x.dim(0) != in_channels()) {
      throw std::invalid_argument("fdn block: expected (" +
                                  std::to_string(in_channels()) +
                                  " x T) input, got " + shape_to_string(x.shape()));
    }
    if (x.dim(1) % 3 != 0) {
      throw std::invalid_argument("fdn block: T=" + std::to_string(x.dim(1)) +
                                  " not divisible by 3");
    }
  }
  std::vector<Tensor> enhanced;
  if (variant == Variant::kHeavy) {
    std::vector<Tensor> conv_out = first_conv(xs, mode, false);
    for (std::size_t n = 0; n < xs.size(); ++n) {
      enhanced.push_back(
          seo_hierarchical_combine(xs[n], conv_out[n], seo, *inner_seo));
    }
  } else {
    for (const Tensor& x : xs) enhanced.push_back(seo_forward(x, seo).enhanced);
  }
  std::vector<Tensor> h = bn_mid.forward(first_conv(enhanced, mode, true), mode);
  std::vector<Tensor> out;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    Tensor r = conv_b.forward(ops::leaky_relu(h[n], leaky_slope));
    Tensor shortcut = skip ? skip->forward(xs[n]) : xs[n];
    out.push_back(ops::maxpool1d(ops::add(r, shortcut), 3));
  }
  return out;
}

void FdnBlock::collect_parameters(const std::string& prefix,
                                  TensorList& out) const {
  seo.collect_parameters(prefix + ".seo", out);
  if (inner_seo) inner_seo->collect_parameters(prefix + ".inner_seo", out);
  if (bn_in) bn_in->collect_parameters(prefix + ".bn_in", out);
  conv_a.collect_parameters(prefix + ".conv_a", out);
  bn_mid.collect_parameters(prefix + ".bn_mid", out);
  conv_b.collect_parameters(prefix + ".conv_b", out);
  if (skip) skip->collect_parameters(prefix + ".skip", out);
}

void FdnBlock::collect_buffers(const std::string& prefix, TensorList& out) const {
  if (bn_in) bn_in->collect_buffers(prefix + ".bn_in", out);
  bn_mid.collect_buffers(prefix + ".bn_mid", out);
}

Tensor fdn_block_forward(const Tensor& x, FdnBlock& block, Mode mode) {
  return block.forward(x, mode);
}

FdnNetwork::FdnNetwork(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t c0 = config_.front_width();
  const std::size_t c1 = config_.block1_width();
  front_conv_ = Conv1dLayer(1, c0, 3, 3, 0);
  front_bn_ = BatchNorm1d(c0);
  for (std::size_t i = 0; i < config_.block0_repeats; ++i) {
    // The first ResConv directly follows BN + LeakyReLU of the front end.
    blocks_.emplace_back(c0, c0, config_.variant, i != 0, config_.alpha,
                         config_.split, config_.leaky_slope);
  }
  for (std::size_t i = 0; i < config_.block1_repeats; ++i) {
    blocks_.emplace_back(i == 0 ? c0 : c1, c1, config_.variant, true,
                         config_.alpha, config_.split, config_.leaky_slope);
  }
  gru_ = GruLayer(c1, config_.gru_width());
  embed_ = LinearLayer(config_.gru_width(), config_.embedding_width());
  classifier_ = LinearLayer(config_.embedding_width(), config_.num_speakers);
}

void FdnNetwork::initialize(std::uint64_t seed) {
  SplitMix64 rng(seed);
  init_parameters(front_conv_, rng.next());
  init_parameters(front_bn_, rng.next());
  for (FdnBlock& block : blocks_) {
    for (SeoModule* seo : {&block.seo, block.inner_seo ? &*block.inner_seo : nullptr}) {
      if (seo == nullptr) continue;
      init_parameters(seo->end_reduce, rng.next());
      init_parameters(seo->begin_reduce, rng.next());
      init_parameters(seo->expand, rng.next());
    }
    if (block.bn_in) init_parameters(*block.bn_in, rng.next());
    init_parameters(block.conv_a, rng.next());
    init_parameters(block.bn_mid, rng.next());
    init_parameters(block.conv_b, rng.next());
    if (block.skip) init_parameters(*block.skip, rng.next());
  }
  init_parameters(gru_, rng.next());
  init_parameters(embed_, rng.next());
  init_parameters(classifier_, rng.next());
}

ForwardResult FdnNetwork::forward(const Tensor& wave, Mode mode) {
  return forward(std::vector<Tensor>{wave}, mode)[0];
}

std::vector<ForwardResult> FdnNetwork::forward(const std::vector<Tensor>& waves,
                                               Mode mode) {
  if (waves.empty()) throw std::invalid_argument("forward: empty batch");
  const std::size_t samples = waves[0].numel();
  if (samples < min_samples()) {
    throw std::invalid_argument("input of " + std::to_string(samples) +
                                " samples is below the minimum length " +
                                std::to_string(min_samples()));
  }
  if ((samples / 3) % (min_samples() / 3) != 0) {
    throw std::invalid_argument(
        "input of " + std::to_string(samples) +
        " samples does not reach the minimum length alignment: floor(T/3) "
        "must be a multiple of " + std::to_string(min_samples() / 3));
  }
  std::vector<Tensor> xs;
  for (const Tensor& wave : waves) {
    if (wave.numel() != samples) {
      throw std::invalid_argument("forward: batch waveforms differ in length");
    }
    Tensor x = wave.rank() == 2 && wave.dim(0) == 1
                   ? wave
                   : ops::reshape(wave, {1, samples});
    xs.push_back(front_conv_.forward(x));
  }
  xs = front_bn_.forward(xs, mode);
  for (Tensor& x : xs) x = ops::leaky_relu(x, config_.leaky_slope);

  std::vector<ForwardResult> results(waves.size());
  auto note_shape = [&] {
    for (std::size_t n = 0; n < xs.size(); ++n) {
      results[n].stage_shapes.push_back(xs[n].shape());
    }
  };
  note_shape();
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    xs = blocks_[i].forward(xs, mode);
    if (i + 1 == config_.block0_repeats) note_shape();
  }
  note_shape();
  for (std::size_t n = 0; n < xs.size(); ++n) {
    ForwardResult& r = results[n];
    Tensor utterance = gru_.forward(ops::transpose(xs[n]));
    r.stage_shapes.push_back(utterance.shape());
    r.embedding = embed_.forward(utterance);
    r.stage_shapes.push_back(r.embedding.shape());
    r.logits = classifier_.forward(r.embedding);
    r.stage_shapes.push_back(r.logits.shape());
  }
  return results;
}

TensorList FdnNetwork::parameters() const {
  TensorList out;
  front_conv_.collect_parameters("front.conv", out);
  front_bn_.collect_parameters("front.bn", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_parameters("block" + std::to_string(i), out);
  }
  gru_.collect_parameters("gru", out);
  embed_.collect_parameters("embedding", out);
  classifier_.collect_parameters("classifier", out);
  return out;
}

TensorList FdnNetwork::buffers() const {
  TensorList out;
  front_bn_.collect_buffers("front.bn", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_buffers("block" + std::to_string(i), out);
  }
  return out;
}

TensorList FdnNetwork::state() const {
  TensorList out = parameters();
  for (NamedTensor& b : buffers()) out.push_back(std::move(b));
  return out;
}

std::size_t FdnNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& p : parameters()) n += p.tensor.numel();
  return n;
}

std::size_t count_parameters(const ModelConfig& config) {
  return FdnNetwork(config).parameter_count();
}

}  // namespace fdnsv
