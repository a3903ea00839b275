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

#include "fdnsv/audio.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

namespace fdnsv {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 |
         static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

Waveform parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    throw WavError("RIFF", "missing RIFF header");
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError("RIFF", "form type is not WAVE");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> payload;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string tag(reinterpret_cast<const char*>(bytes.data() + pos), 4);
    const std::uint32_t size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw WavError(tag, "chunk size " + std::to_string(size) +
                              " runs past end of file");
    }
    if (tag == "fmt ") {
      if (size < 16) throw WavError(tag, "fmt chunk shorter than 16 bytes");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw WavError(tag, "truncated extensible fmt chunk");
        format = read_u16(bytes, body + 24);
      }
      have_fmt = true;
    } else if (tag == "data") {
      payload = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw WavError("fmt ", "missing fmt chunk");
  if (!have_data) throw WavError("data", "missing data chunk");
  if (channels == 0) throw WavError("fmt ", "zero channels");
  if (rate == 0) throw WavError("fmt ", "zero sample rate");

  std::size_t width = 0;
  if (format == kFormatPcm && bits == 16) {
    width = 2;
  } else if (format == kFormatFloat && bits == 32) {
    width = 4;
  } else {
    throw WavError("fmt ", "unsupported codec (format " + std::to_string(format) +
                               ", " + std::to_string(bits) + " bits)");
  }
  const std::size_t frame = width * channels;
  if (payload.size() % frame != 0) {
    throw WavError("data", "payload is not a whole number of frames");
  }
  const std::size_t frames = payload.size() / frame;
  if (frames == 0) throw WavError("data", "no samples");

  Waveform wave;
  wave.sample_rate = rate;
  wave.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t at = f * frame + c * width;
      if (width == 2) {
        acc += static_cast<std::int16_t>(read_u16(payload, at)) / 32768.0;
      } else {
        acc += std::bit_cast<float>(read_u32(payload, at));
      }
    }
    const double v = channels == 1 ? acc : acc / channels;
    if (!std::isfinite(v)) throw WavError("data", "non-finite sample");
    wave.samples[f] = v;
  }
  return wave;
}

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const Waveform& wave, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(wave.samples.size() * (bits / 8));
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, wave.sample_rate);
  put_u32(out, wave.sample_rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double x : wave.samples) {
    if (pcm) {
      const double scaled = std::clamp(std::nearbyint(x * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
    }
  }
  return out;
}

void write_wav(const std::string& path, const Waveform& wave, WavEncoding encoding) {
  const auto bytes = encode_wav(wave, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Waveform pre_emphasis(const Waveform& wave, double coeff) {
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.resize(wave.samples.size());
  if (wave.samples.empty()) return out;
  out.samples[0] = wave.samples[0];
  for (std::size_t t = 1; t < wave.samples.size(); ++t) {
    out.samples[t] = wave.samples[t] - coeff * wave.samples[t - 1];
  }
  return out;
}

Waveform crop_or_pad(const Waveform& wave, std::size_t n, CropPolicy policy,
                     SplitMix64& rng) {
  if (n < 1) throw std::invalid_argument("crop_or_pad: n must be >= 1");
  const std::size_t len = wave.samples.size();
  if (len == 0) throw std::invalid_argument("crop_or_pad: empty waveform");
  Waveform out;
  out.sample_rate = wave.sample_rate;
  if (len == n) {
    out.samples = wave.samples;
  } else if (len > n) {
    const std::size_t slack = len - n;
    const std::size_t offset =
        policy == CropPolicy::kRandom ? rng.below(slack + 1) : slack / 2;
    out.samples.assign(wave.samples.begin() + offset,
                       wave.samples.begin() + offset + n);
  } else {
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = wave.samples[i % len];
  }
  return out;
}

Waveform crop_or_pad(const Waveform& wave, std::size_t n, CropPolicy policy,
                     std::uint64_t seed) {
  SplitMix64 rng(seed);
  return crop_or_pad(wave, n, policy, rng);
}

Waveform speed_perturb(const Waveform& wave, double factor) {
  if (!(factor >= 0.5 && factor <= 2.0)) {
    throw std::invalid_argument("speed_perturb: factor " + std::to_string(factor) +
                                " outside [0.5, 2.0]");
  }
  const std::size_t len = wave.samples.size();
  if (len == 0) throw std::invalid_argument("speed_perturb: empty waveform");
  const auto out_len = static_cast<std::size_t>(
      std::max(1.0, std::round(static_cast<double>(len) / factor)));
  Waveform out;
  out.sample_rate = wave.sample_rate;
  out.samples.resize(out_len);
  const auto& x = wave.samples;
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * factor;
    const auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= len) {
      out.samples[i] = x[len - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(k);
    out.samples[i] = x[k] + (x[k + 1] - x[k]) * frac;
  }
  return out;
}

CorpusManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  CorpusManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!std::getline(ls, e.utterance_id, '\t') ||
        !std::getline(ls, e.speaker_id, '\t') || !std::getline(ls, e.path) ||
        e.utterance_id.empty() || e.speaker_id.empty() || e.path.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected utterance_id<TAB>speaker_id<TAB>path");
    }
    std::filesystem::path p(e.path);
    if (p.is_relative()) e.path = (base / p).string();
    manifest.push_back(std::move(e));
  }
  validate_manifest(manifest);
  return manifest;
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  for (const ManifestEntry& e : manifest) {
    out << e.utterance_id << '\t' << e.speaker_id << '\t' << e.path << '\n';
  }
}

void validate_manifest(const CorpusManifest& manifest) {
  std::set<std::string> seen;
  for (const ManifestEntry& e : manifest) {
    if (!seen.insert(e.utterance_id).second) {
      throw std::invalid_argument("duplicate utterance id '" + e.utterance_id +
                                  "' in manifest");
    }
  }
}

Waveform synthesize_utterance(const SyntheticCorpusOptions& options,
                              std::size_t speaker, std::uint64_t utterance_key) {
  if (options.num_speakers < 2) {
    throw std::invalid_argument("synthetic corpus needs at least 2 speakers");
  }
  SplitMix64 speaker_rng =
      SplitMix64(options.seed).fork(0x5eed0000ULL + static_cast<std::uint64_t>(speaker));
  // Fundamentals log-spaced over [120, 1000] Hz with +-10% of a step of
  // per-speaker jitter; the third harmonic stays below 3.2 kHz.
  const double n = static_cast<double>(options.num_speakers);
  const double step = std::log(1000.0 / 120.0) / (n - 1.0);
  const double f0 = 120.0 * std::exp(step * (static_cast<double>(speaker) +
                                             speaker_rng.uniform(-0.1, 0.1)));
  double amps[3];
  for (double& a : amps) a = speaker_rng.uniform(0.2, 1.0);
  const double env_rate = speaker_rng.uniform(8.0, 30.0);
  const double env_depth = speaker_rng.uniform(0.2, 0.8);

  SplitMix64 rng = speaker_rng.fork(utterance_key + 1);
  const double pitch = f0 * (1.0 + rng.uniform(-0.01, 0.01));
  // Each utterance is a window starting at a random offset into the
  // speaker's ongoing signal, so phases move together.
  double phases[3];
  for (double& p : phases) p = speaker_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double offset = rng.uniform(0.0, 1.0);
  for (int h = 0; h < 3; ++h) {
    phases[h] += 2.0 * std::numbers::pi * (h + 1) * pitch * offset;
  }
  const double env_phase = 2.0 * std::numbers::pi * env_rate * offset;
  const double gain = 0.8 / ((1.0 + env_depth) * (amps[0] + amps[1] + amps[2]));

  Waveform wave;
  wave.sample_rate = options.sample_rate;
  wave.samples.resize(options.length);
  const double sr = static_cast<double>(options.sample_rate);
  for (std::size_t i = 0; i < options.length; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double env =
        1.0 + env_depth * std::sin(2.0 * std::numbers::pi * env_rate * t + env_phase);
    double tone = 0.0;
    for (int h = 0; h < 3; ++h) {
      tone += amps[h] * std::sin(2.0 * std::numbers::pi * (h + 1) * pitch * t + phases[h]);
    }
    const double v = gain * env * tone + 0.02 * rng.normal();
    wave.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return wave;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");
  SyntheticCorpus corpus;
  CorpusManifest train_rel, test_rel;
  char name[64];
  for (std::size_t s = 0; s < options.num_speakers; ++s) {
    std::snprintf(name, sizeof(name), "spk%03zu", s);
    const std::string speaker = name;
    auto emit = [&](std::size_t u, bool test, CorpusManifest& rel,
                    CorpusManifest& resolved) {
      std::snprintf(name, sizeof(name), "%s_%s%03zu", speaker.c_str(),
                    test ? "test" : "train", u);
      const std::string id = name;
      const std::string rel_path = "wav/" + id + ".wav";
      const std::uint64_t key = test ? 100000 + u : u;
      write_wav((fs::path(out_dir) / rel_path).string(),
                synthesize_utterance(options, s, key));
      rel.push_back({id, speaker, rel_path});
      resolved.push_back({id, speaker, (fs::path(out_dir) / rel_path).string()});
    };
    for (std::size_t u = 0; u < options.train_utterances; ++u) {
      emit(u, false, train_rel, corpus.train);
    }
    for (std::size_t u = 0; u < options.test_utterances; ++u) {
      emit(u, true, test_rel, corpus.test);
    }
  }
  write_manifest((fs::path(out_dir) / "train.lst").string(), train_rel);
  write_manifest((fs::path(out_dir) / "test.lst").string(), test_rel);
  return corpus;
}

}  // namespace fdnsv
