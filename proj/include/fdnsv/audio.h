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

#ifndef FDNSV_AUDIO_H_
#define FDNSV_AUDIO_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdnsv/rng.h"

namespace fdnsv {

struct Waveform {
  std::vector<double> samples;
  std::uint32_t sample_rate = 16000;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Parse/format failure; chunk() names the RIFF chunk at fault.
class WavError : public std::runtime_error {
 public:
  WavError(std::string chunk, const std::string& message)
      : std::runtime_error("wav [" + chunk + "]: " + message),
        chunk_(std::move(chunk)) {}
  const std::string& chunk() const { return chunk_; }

 private:
  std::string chunk_;
};

// PCM16 or IEEE float32; multi-channel input is averaged to mono. PCM16
// samples map to [-1, 1) by division by 32768.
Waveform parse_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::string& path);

// PCM16 output rounds x * 32768 to nearest and saturates.
std::vector<std::uint8_t> encode_wav(const Waveform& wave,
                                     WavEncoding encoding = WavEncoding::kPcm16);
void write_wav(const std::string& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kPcm16);

// y[0] = x[0], y[t] = x[t] - coeff * x[t-1].
Waveform pre_emphasis(const Waveform& wave, double coeff = 0.97);

enum class CropPolicy { kRandom, kCenter };

// Exactly n samples: a contiguous crop of longer input (random offset drawn
// from rng, or centered), cyclic repetition of shorter input.
Waveform crop_or_pad(const Waveform& wave, std::size_t n, CropPolicy policy,
                     SplitMix64& rng);
Waveform crop_or_pad(const Waveform& wave, std::size_t n, CropPolicy policy,
                     std::uint64_t seed = 0);

// Linear-interpolation resampling to round(len / factor) samples; factor
// must lie in [0.5, 2]. factor > 1 speeds the audio up.
Waveform speed_perturb(const Waveform& wave, double factor);

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string path;
};
using CorpusManifest = std::vector<ManifestEntry>;

// One `utterance_id<TAB>speaker_id<TAB>path` per line. Relative paths are
// resolved against the manifest's directory on read.
CorpusManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const CorpusManifest& manifest);
void validate_manifest(const CorpusManifest& manifest);

struct SyntheticCorpusOptions {
  std::size_t num_speakers = 8;
  std::size_t train_utterances = 10;  // per speaker
  std::size_t test_utterances = 4;    // per speaker, held out
  std::size_t length = 2187;          // samples per utterance
  std::uint32_t sample_rate = 16000;
  std::uint64_t seed = 1;
};

// Each speaker owns a fundamental with 3 harmonics at fixed relative
// amplitudes and phases plus a periodic amplitude envelope. An utterance
// is that signal seen from a random time offset, with a small pitch jitter
// and additive noise. Separable by construction.
Waveform synthesize_utterance(const SyntheticCorpusOptions& options,
                              std::size_t speaker, std::uint64_t utterance_key);

struct SyntheticCorpus {
  CorpusManifest train;
  CorpusManifest test;
};

// Writes PCM16 files plus train.lst / test.lst manifests under out_dir.
SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                          const std::string& out_dir);

}  // namespace fdnsv

#endif  // FDNSV_AUDIO_H_
