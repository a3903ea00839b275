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

#ifndef FDNSV_RUN_CONFIG_H_
#define FDNSV_RUN_CONFIG_H_

#include <iosfwd>
#include <string>

#include "fdnsv/audio.h"
#include "fdnsv/model.h"
#include "fdnsv/training.h"

namespace fdnsv {

// Everything a command-line run can configure. Model keys use the same
// names as the checkpoint header; the rest cover training and corpus
// synthesis.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SyntheticCorpusOptions corpus;
  bool speakers_set = false;  // num_speakers given explicitly
};

// Flat `key = value` text; blank lines and `#` comments are skipped.
// Unknown keys and malformed lines throw std::invalid_argument naming the
// line number.
void apply_run_config(RunConfig& config, std::istream& in);
void apply_run_config_file(RunConfig& config, const std::string& path);
void apply_run_config_entry(RunConfig& config, const std::string& key,
                            const std::string& value);

}  // namespace fdnsv

#endif  // FDNSV_RUN_CONFIG_H_
