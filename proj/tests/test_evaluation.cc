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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "eer_reference.h"
#include "fdnsv/evaluation.h"
#include "fdnsv/rng.h"

using namespace fdnsv;
namespace fs = std::filesystem;

namespace {

ScoreSet make_set(const std::vector<double>& targets, const std::vector<double>& nontargets) {
  ScoreSet s;
  for (double t : targets) s.add(t, true);
  for (double n : nontargets) s.add(n, false);
  return s;
}

struct SmallCorpus {
  SyntheticCorpus corpus;
  FdnNetwork network{ModelConfig::tiny()};
};

SmallCorpus& small_corpus() {
  static SmallCorpus c = [] {
    SmallCorpus out;
    fs::path dir = fs::path(FDNSV_TEST_TMP) / "eval_corpus";
    fs::remove_all(dir);
    SyntheticCorpusOptions opts;
    opts.num_speakers = 3;
    opts.train_utterances = 1;
    opts.test_utterances = 2;
    out.corpus = generate_synthetic_corpus(opts, dir.string());
    out.network.initialize(11);
    return out;
  }();
  return c;
}

}  // namespace

TEST_CASE("EER worked examples") {
  CHECK(compute_eer(make_set({0.9, 0.8}, {0.1, 0.2})).eer == 0.0);
  CHECK(compute_eer(make_set({1, 3}, {2, 4})).eer == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(compute_eer(make_set({0.1, 0.2}, {0.8, 0.9})).eer == doctest::Approx(1.0));
  CHECK_THROWS(compute_eer(make_set({0.5}, {})));
  CHECK_THROWS(compute_eer(make_set({}, {0.5})));
}

TEST_CASE("EER matches brute force on random score sets") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.next() % 120;
    ScoreSet s;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid forces ties now and then
      const double v = trial % 3 == 0 ? std::round(rng.normal() * 4) / 4 : rng.normal();
      s.add(v + (i % 2 == 0 ? 0.7 : 0.0), i % 2 == 0);
    }
    CHECK(std::abs(compute_eer(s).eer - testing::brute_force_eer(s)) < 1e-12);
  }
}

TEST_CASE("EER is unchanged by strictly increasing transforms") {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    ScoreSet s, affine, squashed;
    for (int i = 0; i < 60; ++i) {
      const bool target = rng.uniform(0, 1) < 0.4;
      const double v = rng.normal() + (target ? 0.5 : 0.0);
      s.add(v, target);
      affine.add(2 * v + 1, target);
      squashed.add(std::tanh(v), target);
    }
    const double base = compute_eer(s).eer;
    CHECK(compute_eer(affine).eer == base);
    CHECK(compute_eer(squashed).eer == base);
  }
}

TEST_CASE("cosine score") {
  const std::vector<double> a{1, 0}, b{0, 2}, c{-3, 0}, d{2, 2};
  CHECK(cosine_score(a, a) == doctest::Approx(1.0));
  CHECK(cosine_score(a, b) == 0.0);
  CHECK(cosine_score(a, c) == doctest::Approx(-1.0));
  CHECK(cosine_score(a, d) == doctest::Approx(std::sqrt(0.5)));
  const std::vector<double> zero{0, 0}, three{1, 2, 3};
  CHECK_THROWS_AS(cosine_score(a, zero), std::invalid_argument);
  CHECK_THROWS_AS(cosine_score(a, three), std::invalid_argument);
}

TEST_CASE("trial lists round trip and reject malformed lines") {
  std::vector<Trial> trials{{true, "a", "b"}, {false, "a", "c"}};
  std::stringstream ss;
  write_trials(ss, trials);
  CHECK(ss.str() == "1 a b\n0 a c\n");
  std::vector<Trial> back = read_trials(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[1].test == "c");
  CHECK_FALSE(back[1].target);
  std::istringstream bad("2 a b\n");
  CHECK_THROWS(read_trials(bad));
  std::istringstream shortline("1 a\n");
  CHECK_THROWS(read_trials(shortline));
}

TEST_CASE("all-pairs trials cover every unordered pair once") {
  CorpusManifest m{{"a1", "A", "x"}, {"a2", "A", "y"}, {"b1", "B", "z"}};
  std::vector<Trial> t = make_all_pairs_trials(m);
  REQUIRE(t.size() == 3);
  std::set<std::pair<std::string, std::string>> seen;
  for (const Trial& tr : t) {
    seen.insert(std::minmax(tr.enroll, tr.test));
    CHECK(tr.target == (tr.enroll[0] == tr.test[0]));
  }
  CHECK(seen.size() == 3);
}

TEST_CASE("embeddings are unit length and identical inputs score one") {
  SmallCorpus& c = small_corpus();
  Waveform w = read_wav(c.corpus.test[0].path);
  Embedding e = extract_embedding(c.network, w);
  CHECK(e.size() == 1024 / 16);
  double norm = 0;
  for (double v : e) norm += v * v;
  CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-12);
  Embedding again = extract_embedding(c.network, w);
  CHECK(e == again);
  CHECK(std::abs(cosine_score(e, again) - 1.0) < 1e-12);
}

TEST_CASE("protocol scoring") {
  SmallCorpus& c = small_corpus();
  std::vector<Trial> trials = make_all_pairs_trials(c.corpus.test);
  ProtocolReport r = evaluate_protocol(c.network, c.corpus.test, trials);
  CHECK(r.targets == 3);
  CHECK(r.nontargets == 12);
  std::size_t binned = 0;
  for (std::size_t h : r.histogram) binned += h;
  CHECK(binned == trials.size());

  SUBCASE("trial order does not change per-trial scores or EER") {
    std::vector<Trial> reversed(trials.rbegin(), trials.rend());
    ProtocolReport rr = evaluate_protocol(c.network, c.corpus.test, reversed);
    CHECK(rr.eer.eer == r.eer.eer);
    for (std::size_t i = 0; i < trials.size(); ++i) {
      CHECK(rr.scores.scores[trials.size() - 1 - i] == r.scores.scores[i]);
    }
  }
  SUBCASE("paths work as trial fields") {
    std::vector<Trial> by_path{{true, c.corpus.test[0].path, c.corpus.test[1].path}};
    ProtocolReport p = evaluate_protocol(c.network, c.corpus.test,
                                         {{true, c.corpus.test[0].utterance_id,
                                           c.corpus.test[1].utterance_id},
                                          {false, c.corpus.test[0].utterance_id,
                                           c.corpus.test[2].utterance_id}});
    ProtocolReport q = evaluate_protocol(
        c.network, c.corpus.test,
        {by_path[0], {false, c.corpus.test[0].path, c.corpus.test[2].path}});
    CHECK(p.scores.scores == q.scores.scores);
  }
  SUBCASE("unknown utterance is named in the error") {
    std::vector<Trial> bad{{true, c.corpus.test[0].utterance_id, "nobody_here"}};
    CHECK_THROWS_WITH(evaluate_protocol(c.network, c.corpus.test, bad),
                      doctest::Contains("nobody_here"));
  }
  SUBCASE("sweep at factor one reproduces the plain protocol") {
    std::vector<SweepRow> rows = perturbation_sweep(c.network, c.corpus.test, trials, {1.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].eer.eer == r.eer.eer);
    CHECK(rows[0].eer.threshold == r.eer.threshold);
    CHECK(perturbation_sweep(c.network, c.corpus.test, trials, {}).empty());
    std::ostringstream out;
    write_sweep_report(out, {{0.5, {0.25, 0.125}}});
    CHECK(out.str() == "0.5\t0.25\t0.125\n");
  }
}
