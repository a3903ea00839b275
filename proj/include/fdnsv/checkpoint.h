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

#ifndef FDNSV_CHECKPOINT_H_
#define FDNSV_CHECKPOINT_H_

#include <iosfwd>
#include <string>

#include "fdnsv/model.h"

namespace fdnsv {

// Layout:
//   fdnsv-checkpoint 1
//   <config key> <value>            one line per ModelConfig field
//   tensors <count>
//   <name> <d0,d1,...> <byte offset>  in state() order
//   end
//   <little-endian float64 payload, tensors concatenated>
// Offsets are relative to the first payload byte.
void save_checkpoint(std::ostream& out, const FdnNetwork& network);
void save_checkpoint(const std::string& path, const FdnNetwork& network);

FdnNetwork load_checkpoint(std::istream& in);
FdnNetwork load_checkpoint(const std::string& path);

// Serializes/parses the config lines shared with the header above.
std::string config_to_text(const ModelConfig& config);
void apply_config_entry(ModelConfig& config, const std::string& key,
                        const std::string& value);

}  // namespace fdnsv

#endif  // FDNSV_CHECKPOINT_H_
