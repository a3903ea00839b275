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

#include "fdnsv/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fdnsv/tensor.h"

namespace fdnsv {

Embedding extract_embedding(FdnNetwork& network, const Waveform& wave,
                            double pre_emphasis_coeff) {
  const std::size_t stride = network.min_samples();
  const std::size_t wanted =
      std::max(wave.samples.size(), network.config().crop_samples);
  Waveform padded = crop_or_pad(wave, wanted, CropPolicy::kCenter);
  padded.samples.resize(padded.samples.size() / stride * stride);
  Waveform input = pre_emphasis(padded, pre_emphasis_coeff);
  const std::size_t n = input.samples.size();

  NoGradGuard no_grad;
  ForwardResult out =
      network.forward(Tensor({1, n}, std::move(input.samples)), Mode::kEval);
  Embedding e(out.embedding.data().begin(), out.embedding.data().end());
  double norm = 0.0;
  for (double v : e) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw std::runtime_error("embedding has zero norm");
  for (double& v : e) v /= norm;
  return e;
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_score: size mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine_score: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

EerResult compute_eer(const ScoreSet& set) {
  if (set.scores.size() != set.is_target.size()) {
    throw std::invalid_argument("compute_eer: scores and labels differ in length");
  }
  std::vector<std::size_t> order(set.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.scores[a] < set.scores[b];
  });
  std::size_t n_target = 0;
  for (bool t : set.is_target) n_target += t ? 1 : 0;
  const std::size_t n_nontarget = set.scores.size() - n_target;
  if (n_target == 0 || n_nontarget == 0) {
    throw std::invalid_argument(
        "compute_eer: need at least one target and one nontarget score");
  }
  const double nt = static_cast<double>(n_target);
  const double nn = static_cast<double>(n_nontarget);

  // Walk distinct thresholds upward. Before visiting group i, `targets_below`
  // and `nontargets_below` count scores strictly below its value.
  std::size_t targets_below = 0, nontargets_below = 0;
  double prev_far = 1.0, prev_frr = 0.0, prev_th = set.scores[order[0]];
  bool first = true;
  std::size_t i = 0;
  while (true) {
    double th, far, frr;
    if (i < order.size()) {
      th = set.scores[order[i]];
      far = (nn - static_cast<double>(nontargets_below)) / nn;
      frr = static_cast<double>(targets_below) / nt;
    } else {
      th = prev_th;  // closing point, above every score
      far = 0.0;
      frr = 1.0;
    }
    if (!first && frr >= far) {
      const double d_prev = prev_far - prev_frr;  // > 0
      const double d_cur = far - frr;             // <= 0
      const double w = d_prev / (d_prev - d_cur);
      EerResult r;
      r.eer = prev_frr + w * (frr - prev_frr);
      r.threshold = prev_th + w * (th - prev_th);
      return r;
    }
    first = false;
    prev_far = far;
    prev_frr = frr;
    prev_th = th;
    if (i >= order.size()) break;
    const double value = set.scores[order[i]];
    while (i < order.size() && set.scores[order[i]] == value) {
      (set.is_target[order[i]] ? targets_below : nontargets_below) += 1;
      ++i;
    }
  }
  // Unreachable: the closing point always has FRR 1 >= FAR 0.
  throw std::logic_error("compute_eer: sweep did not cross");
}

std::vector<Trial> read_trials(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string label;
    Trial t;
    if (!(ls >> label)) continue;
    std::string extra;
    if (!(ls >> t.enroll >> t.test) || (ls >> extra) || (label != "1" && label != "0")) {
      throw std::invalid_argument("trials line " + std::to_string(line_no) +
                                  ": expected `1|0 enroll test`");
    }
    t.target = label == "1";
    trials.push_back(std::move(t));
  }
  return trials;
}

std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trials file " + path);
  return read_trials(in);
}

void write_trials(std::ostream& out, const std::vector<Trial>& trials) {
  for (const Trial& t : trials) {
    out << (t.target ? '1' : '0') << ' ' << t.enroll << ' ' << t.test << '\n';
  }
}

std::vector<Trial> make_all_pairs_trials(const CorpusManifest& manifest) {
  std::vector<Trial> trials;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    for (std::size_t j = i + 1; j < manifest.size(); ++j) {
      trials.push_back({manifest[i].speaker_id == manifest[j].speaker_id,
                        manifest[i].utterance_id, manifest[j].utterance_id});
    }
  }
  return trials;
}

ProtocolReport evaluate_protocol(FdnNetwork& network, const CorpusManifest& manifest,
                                 const std::vector<Trial>& trials,
                                 double test_speed_factor) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    index.emplace(manifest[i].utterance_id, i);
    index.emplace(manifest[i].path, i);
  }
  std::vector<std::string> missing;
  auto resolve = [&](const std::string& key) -> std::size_t {
    auto it = index.find(key);
    if (it == index.end()) {
      if (std::find(missing.begin(), missing.end(), key) == missing.end()) {
        missing.push_back(key);
      }
      return 0;
    }
    return it->second;
  };
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Trial& t : trials) pairs.emplace_back(resolve(t.enroll), resolve(t.test));
  if (!missing.empty()) {
    std::string msg = "trials reference utterances missing from the manifest:";
    for (const std::string& m : missing) msg += " " + m;
    throw std::invalid_argument(msg);
  }

  // Clean enrollment embeddings and (possibly perturbed) test embeddings,
  // computed once per utterance. Identical when the factor is 1.
  std::map<std::size_t, Embedding> clean, perturbed;
  auto embed = [&](std::size_t idx, bool test_side) -> const Embedding& {
    const bool perturb = test_side && test_speed_factor != 1.0;
    auto& cache = perturb ? perturbed : clean;
    auto it = cache.find(idx);
    if (it != cache.end()) return it->second;
    Waveform w = read_wav(manifest[idx].path);
    if (perturb) w = speed_perturb(w, test_speed_factor);
    return cache.emplace(idx, extract_embedding(network, w)).first->second;
  };

  ProtocolReport report;
  report.histogram.assign(10, 0);
  double sum_t = 0.0, sum_n = 0.0;
  for (std::size_t k = 0; k < trials.size(); ++k) {
    const Embedding& a = embed(pairs[k].first, false);
    const Embedding& b = embed(pairs[k].second, true);
    const double s = cosine_score(a, b);
    report.scores.add(s, trials[k].target);
    if (trials[k].target) {
      ++report.targets;
      sum_t += s;
    } else {
      ++report.nontargets;
      sum_n += s;
    }
    const auto bin = static_cast<std::size_t>(std::clamp((s + 1.0) / 0.2, 0.0, 9.0));
    ++report.histogram[bin];
  }
  if (report.targets) report.mean_target = sum_t / static_cast<double>(report.targets);
  if (report.nontargets) {
    report.mean_nontarget = sum_n / static_cast<double>(report.nontargets);
  }
  report.eer = compute_eer(report.scores);
  return report;
}

std::vector<SweepRow> perturbation_sweep(FdnNetwork& network,
                                         const CorpusManifest& manifest,
                                         const std::vector<Trial>& trials,
                                         const std::vector<double>& factors) {
  for (double f : factors) {
    if (!(f >= 0.5 && f <= 2.0)) {
      throw std::invalid_argument("speed factor " + std::to_string(f) +
                                  " outside [0.5, 2.0]");
    }
  }
  std::vector<SweepRow> rows;
  for (double f : factors) {
    rows.push_back({f, evaluate_protocol(network, manifest, trials, f).eer});
  }
  return rows;
}

void write_sweep_report(std::ostream& out, const std::vector<SweepRow>& rows) {
  char buf[96];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g\t%.6g\t%.6g\n", r.factor, r.eer.eer,
                  r.eer.threshold);
    out << buf;
  }
}

}  // namespace fdnsv
