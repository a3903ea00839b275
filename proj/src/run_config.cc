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

#include "fdnsv/run_config.h"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <stdexcept>

#include "fdnsv/checkpoint.h"

namespace fdnsv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (value.empty() || *end != '\0') {
    throw std::invalid_argument(key + ": expected a number, got '" + value + "'");
  }
  return v;
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || value[0] == '-' || *end != '\0') {
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" +
                                value + "'");
  }
  return v;
}

}  // namespace

void apply_run_config_entry(RunConfig& c, const std::string& key,
                            const std::string& value) {
  if (key == "epochs") {
    c.train.epochs = to_count(key, value);
  } else if (key == "batch_size") {
    c.train.batch_size = to_count(key, value);
    if (c.train.batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  } else if (key == "seed") {
    c.train.seed = to_count(key, value);
    c.corpus.seed = c.train.seed;
  } else if (key == "crop") {
    if (value == "random") {
      c.train.crop = CropPolicy::kRandom;
    } else if (value == "center") {
      c.train.crop = CropPolicy::kCenter;
    } else {
      throw std::invalid_argument("crop must be random or center");
    }
  } else if (key == "pre_emphasis") {
    c.train.pre_emphasis = to_double(key, value);
  } else if (key == "lr") {
    c.train.optimizer.lr = to_double(key, value);
  } else if (key == "beta1") {
    c.train.optimizer.beta1 = to_double(key, value);
  } else if (key == "beta2") {
    c.train.optimizer.beta2 = to_double(key, value);
  } else if (key == "adam_eps") {
    c.train.optimizer.eps = to_double(key, value);
  } else if (key == "weight_decay") {
    c.train.optimizer.weight_decay = to_double(key, value);
  } else if (key == "checkpoint_every") {
    c.train.checkpoint_every = to_count(key, value);
  } else if (key == "train_utterances") {
    c.corpus.train_utterances = to_count(key, value);
  } else if (key == "test_utterances") {
    c.corpus.test_utterances = to_count(key, value);
  } else if (key == "utterance_length") {
    c.corpus.length = to_count(key, value);
  } else if (key == "sample_rate") {
    c.corpus.sample_rate = static_cast<std::uint32_t>(to_count(key, value));
  } else {
    apply_config_entry(c.model, key, value);
    if (key == "num_speakers" || key == "speakers") {
      c.speakers_set = true;
      c.corpus.num_speakers = c.model.num_speakers;
    }
  }
}

void apply_run_config(RunConfig& config, std::istream& in) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_run_config_entry(config, key, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": " +
                                  e.what());
    }
  }
}

void apply_run_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  apply_run_config(config, in);
}

}  // namespace fdnsv
