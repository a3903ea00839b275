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

#include "fdnsv/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fdnsv {
namespace {

constexpr const char* kMagic = "fdnsv-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-') {
    throw std::invalid_argument("config key '" + key +
                                "' expects a non-negative integer, got '" +
                                value + "'");
  }
  return static_cast<std::size_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty()) {
    throw std::invalid_argument("config key '" + key +
                                "' expects a number, got '" + value + "'");
  }
  return v;
}

void write_le(std::ostream& out, std::span<const double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  } else {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      char bytes[8];
      for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>(bits >> (8 * i));
      out.write(bytes, 8);
    }
  }
}

void read_le(std::istream& in, std::span<double> values) {
  std::vector<unsigned char> raw(values.size() * 8);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor payload");
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(raw[i * 8 + b]) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
}

std::string dims_to_text(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  return s;
}

}  // namespace

std::string config_to_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant " << to_string(c.variant) << '\n'
     << "front_channels " << c.front_channels << '\n'
     << "block1_channels " << c.block1_channels << '\n'
     << "block0_repeats " << c.block0_repeats << '\n'
     << "block1_repeats " << c.block1_repeats << '\n'
     << "alpha " << c.alpha << '\n'
     << "gru_hidden " << c.gru_hidden << '\n'
     << "embedding_dim " << c.embedding_dim << '\n'
     << "num_speakers " << c.num_speakers << '\n'
     << "crop_samples " << c.crop_samples << '\n'
     << "channel_divisor " << c.channel_divisor << '\n'
     << "leaky_slope " << format_double(c.leaky_slope) << '\n'
     << "split_policy "
     << (c.split.policy == SplitPolicy::kHalves ? "halves" : "sliding") << '\n'
     << "shift_fraction " << format_double(c.split.shift_fraction) << '\n';
  return os.str();
}

void apply_config_entry(ModelConfig& c, const std::string& key,
                        const std::string& value) {
  if (key == "variant") {
    c.variant = parse_variant(value);
  } else if (key == "front_channels") {
    c.front_channels = parse_size(key, value);
  } else if (key == "block1_channels") {
    c.block1_channels = parse_size(key, value);
  } else if (key == "block0_repeats") {
    c.block0_repeats = parse_size(key, value);
  } else if (key == "block1_repeats") {
    c.block1_repeats = parse_size(key, value);
  } else if (key == "alpha") {
    c.alpha = parse_size(key, value);
  } else if (key == "gru_hidden") {
    c.gru_hidden = parse_size(key, value);
  } else if (key == "embedding_dim") {
    c.embedding_dim = parse_size(key, value);
  } else if (key == "num_speakers" || key == "speakers") {
    c.num_speakers = parse_size(key, value);
  } else if (key == "crop_samples") {
    c.crop_samples = parse_size(key, value);
  } else if (key == "channel_divisor") {
    c.channel_divisor = parse_size(key, value);
  } else if (key == "leaky_slope") {
    c.leaky_slope = parse_double(key, value);
  } else if (key == "split_policy") {
    if (value == "halves") {
      c.split.policy = SplitPolicy::kHalves;
    } else if (value == "sliding") {
      c.split.policy = SplitPolicy::kSlidingWindow;
    } else {
      throw std::invalid_argument("split_policy must be sliding or halves");
    }
  } else if (key == "shift_fraction") {
    c.split.shift_fraction = parse_double(key, value);
  } else {
    throw std::invalid_argument("unknown model config key '" + key + "'");
  }
}

void save_checkpoint(std::ostream& out, const FdnNetwork& network) {
  const TensorList state = network.state();
  std::ostringstream header;
  header << kMagic << ' ' << kVersion << '\n'
         << config_to_text(network.config()) << "tensors " << state.size()
         << '\n';
  std::size_t offset = 0;
  for (const NamedTensor& t : state) {
    header << t.name << ' ' << dims_to_text(t.tensor.shape()) << ' ' << offset
           << '\n';
    offset += t.tensor.numel() * sizeof(double);
  }
  header << "end\n";
  const std::string text = header.str();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const NamedTensor& t : state) write_le(out, t.tensor.data());
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const FdnNetwork& network) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path);
  save_checkpoint(out, network);
}

FdnNetwork load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: empty file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kMagic) throw std::runtime_error("checkpoint: bad magic");
    if (version != kVersion) {
      throw std::runtime_error("checkpoint: unsupported version " +
                               std::to_string(version));
    }
  }
  ModelConfig config;
  std::size_t count = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "tensors") {
      count = parse_size(key, value);
      break;
    }
    apply_config_entry(config, key, value);
  }
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint: truncated manifest");
    std::istringstream ls(line);
    Entry e;
    std::string dims, offset;
    ls >> e.name >> dims >> offset;
    std::istringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ',')) e.shape.push_back(parse_size("shape", d));
    e.offset = parse_size("offset", offset);
    entries.push_back(std::move(e));
  }
  if (!std::getline(in, line) || line != "end") {
    throw std::runtime_error("checkpoint: missing end of header");
  }

  FdnNetwork network(config);
  TensorList state = network.state();
  if (state.size() != entries.size()) {
    throw std::runtime_error("checkpoint: manifest lists " +
                             std::to_string(entries.size()) +
                             " tensors, model expects " +
                             std::to_string(state.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const Entry& e = entries[i];
    if (e.name != state[i].name || e.shape != state[i].tensor.shape()) {
      throw std::runtime_error("checkpoint: tensor '" + e.name +
                               "' does not match model tensor '" +
                               state[i].name + "' " +
                               shape_to_string(state[i].tensor.shape()));
    }
    if (e.offset != offset) {
      throw std::runtime_error("checkpoint: unexpected offset for " + e.name);
    }
    read_le(in, state[i].tensor.data());
    offset += state[i].tensor.numel() * sizeof(double);
  }
  return network;
}

FdnNetwork load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace fdnsv
