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

#ifndef FDNSV_EVALUATION_H_
#define FDNSV_EVALUATION_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fdnsv/audio.h"
#include "fdnsv/model.h"

namespace fdnsv {

using Embedding = std::vector<double>;

// Pre-emphasis, cyclic padding up to crop_samples, truncation to a multiple
// of the network stride, eval-mode forward, L2 normalization.
Embedding extract_embedding(FdnNetwork& network, const Waveform& wave,
                            double pre_emphasis_coeff = 0.97);

// dot(a, b) / (|a| |b|). Throws on a zero vector or size mismatch.
double cosine_score(std::span<const double> a, std::span<const double> b);

struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> is_target;

  void add(double score, bool target) {
    scores.push_back(score);
    is_target.push_back(target);
  }
};

struct EerResult {
  double eer = 0.0;        // in [0, 1]
  double threshold = 0.0;  // accept when score >= threshold
};

// Sweeps a threshold over every distinct score with
//   FAR(th) = #{nontarget >= th} / N_nontarget
//   FRR(th) = #{target < th} / N_target
// and linearly interpolates between the two sweep points bracketing
// FAR = FRR. A final point past the largest score (FAR 0, FRR 1) closes
// the curve.
EerResult compute_eer(const ScoreSet& scores);

struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;
};

// `1|0 enroll test` per line.
std::vector<Trial> read_trials(std::istream& in);
std::vector<Trial> read_trials(const std::string& path);
void write_trials(std::ostream& out, const std::vector<Trial>& trials);

// Every unordered pair of distinct utterances.
std::vector<Trial> make_all_pairs_trials(const CorpusManifest& manifest);

struct ProtocolReport {
  EerResult eer;
  ScoreSet scores;  // in trial order
  std::size_t targets = 0;
  std::size_t nontargets = 0;
  double mean_target = 0.0;
  double mean_nontarget = 0.0;
  std::vector<std::size_t> histogram;  // 10 equal bins over [-1, 1]
};

// Scores all trials by cosine similarity. Trial fields may name utterance
// ids or manifest paths. Embeddings are extracted once per utterance; the
// test side is resampled by `test_speed_factor` first (1.0 = untouched).
ProtocolReport evaluate_protocol(FdnNetwork& network, const CorpusManifest& manifest,
                                 const std::vector<Trial>& trials,
                                 double test_speed_factor = 1.0);

struct SweepRow {
  double factor = 1.0;
  EerResult eer;
};

// evaluate_protocol once per speed factor, perturbing test sides only.
std::vector<SweepRow> perturbation_sweep(FdnNetwork& network,
                                         const CorpusManifest& manifest,
                                         const std::vector<Trial>& trials,
                                         const std::vector<double>& factors);

// `factor<TAB>eer<TAB>threshold`, 6 significant digits.
void write_sweep_report(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace fdnsv

#endif  // FDNSV_EVALUATION_H_
