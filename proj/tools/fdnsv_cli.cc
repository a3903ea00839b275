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

// fdnsv: corpus synthesis, training, extraction, scoring and diagnostics for
// FDN speaker-verification models.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fdnsv/audio.h"
#include "fdnsv/checkpoint.h"
#include "fdnsv/evaluation.h"
#include "fdnsv/grad_suite.h"
#include "fdnsv/model.h"
#include "fdnsv/run_config.h"
#include "fdnsv/training.h"

namespace fs = std::filesystem;
using namespace fdnsv;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> alpha;
  std::optional<std::string> variant;
  std::optional<std::size_t> speakers;
  std::string factors = "0.5,0.7,0.9,1.0,1.1,1.5,2.0";
  bool tiny = false;
  std::string checkpoint;
  std::string manifest;
  std::string trials;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "key = value configuration file");
  cmd->add_option("--seed", o.seed, "seed for every random choice");
  cmd->add_option("--out", o.out, "output path");
  cmd->add_option("--alpha", o.alpha, "SEO reduction ratio")->check(CLI::PositiveNumber);
  cmd->add_option("--variant", o.variant, "light or heavy")
      ->check(CLI::IsMember({"light", "heavy"}));
  cmd->add_option("--speakers", o.speakers, "number of speakers")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--tiny", o.tiny, "start from the tiny test configuration");
}

// defaults (or the tiny preset), then the config file, then flags.
RunConfig build_config(const Options& o) {
  RunConfig rc;
  if (o.tiny) {
    rc.model = ModelConfig::tiny();
    rc.corpus.num_speakers = rc.model.num_speakers;
  }
  if (!o.config_path.empty()) apply_run_config_file(rc, o.config_path);
  if (o.seed) {
    rc.train.seed = *o.seed;
    rc.corpus.seed = *o.seed;
  }
  if (o.alpha) rc.model.alpha = *o.alpha;
  if (o.variant) rc.model.variant = parse_variant(*o.variant);
  if (o.speakers) {
    rc.model.num_speakers = *o.speakers;
    rc.corpus.num_speakers = *o.speakers;
    rc.speakers_set = true;
  }
  return rc;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw std::invalid_argument(std::string(flag) + " is required");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::vector<double> parse_factors(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) {
      throw std::invalid_argument("--factors: bad number '" + item + "'");
    }
    if (!(v >= 0.5 && v <= 2.0)) {
      throw std::invalid_argument("--factors: " + item + " outside [0.5, 2]");
    }
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("--factors: empty list");
  return out;
}

int run_synth(const Options& o) {
  require(o.out, "--out");
  const RunConfig rc = build_config(o);
  const SyntheticCorpus corpus = generate_synthetic_corpus(rc.corpus, o.out);
  const std::vector<Trial> trials = make_all_pairs_trials(corpus.test);
  {
    std::ofstream out(fs::path(o.out) / "trials.txt");
    write_trials(out, trials);
    if (!out) throw std::runtime_error("cannot write trials.txt");
  }
  std::cout << "train_utterances\t" << corpus.train.size() << '\n'
            << "test_utterances\t" << corpus.test.size() << '\n'
            << "trials\t" << trials.size() << '\n';
  return 0;
}

int run_train(const Options& o) {
  require(o.manifest, "--manifest");
  require(o.out, "--out");
  RunConfig rc = build_config(o);
  const TrainingSet data = load_training_set(read_manifest(o.manifest));
  if (!rc.speakers_set) rc.model.num_speakers = data.speakers.size();
  rc.model.validate();
  fs::create_directories(o.out);
  if (rc.train.checkpoint_every > 0) rc.train.checkpoint_dir = o.out;

  FdnNetwork network(rc.model);
  network.initialize(rc.train.seed);
  const std::vector<EpochStats> log =
      train(network, data, rc.train, [](const EpochStats& s) {
        std::cout << s.epoch << '\t' << fmt(s.mean_loss) << '\t' << fmt(s.accuracy)
                  << std::endl;
      });
  {
    std::ofstream out(fs::path(o.out) / "train.log");
    write_training_log(out, log);
  }
  save_checkpoint((fs::path(o.out) / "model.ckpt").string(), network);
  return 0;
}

int run_extract(const Options& o) {
  require(o.checkpoint, "--checkpoint");
  require(o.manifest, "--manifest");
  require(o.out, "--out");
  FdnNetwork network = load_checkpoint(o.checkpoint);
  const CorpusManifest manifest = read_manifest(o.manifest);
  validate_manifest(manifest);
  fs::create_directories(o.out);
  for (const ManifestEntry& e : manifest) {
    const Embedding emb = extract_embedding(network, read_wav(e.path));
    std::ofstream out(fs::path(o.out) / (e.utterance_id + ".emb"));
    out << e.utterance_id << '\t' << emb.size() << '\n';
    for (std::size_t i = 0; i < emb.size(); ++i) {
      out << (i ? " " : "") << fmt(emb[i]);
    }
    out << '\n';
    if (!out) throw std::runtime_error("cannot write embedding for " + e.utterance_id);
  }
  std::cout << "embeddings\t" << manifest.size() << '\n';
  return 0;
}

int run_eval(const Options& o) {
  require(o.checkpoint, "--checkpoint");
  require(o.manifest, "--manifest");
  require(o.trials, "--trials");
  const CorpusManifest manifest = read_manifest(o.manifest);
  const std::vector<Trial> trials = read_trials(o.trials);
  FdnNetwork network = load_checkpoint(o.checkpoint);
  const ProtocolReport report = evaluate_protocol(network, manifest, trials);
  std::ostringstream text;
  text << "eer\t" << fmt(report.eer.eer) << '\n'
       << "threshold\t" << fmt(report.eer.threshold) << '\n'
       << "targets\t" << report.targets << '\n'
       << "nontargets\t" << report.nontargets << '\n'
       << "mean_target\t" << fmt(report.mean_target) << '\n'
       << "mean_nontarget\t" << fmt(report.mean_nontarget) << '\n';
  std::cout << text.str();
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    out << text.str();
    for (std::size_t i = 0; i < trials.size(); ++i) {
      out << "score\t" << (trials[i].target ? 1 : 0) << '\t' << trials[i].enroll
          << '\t' << trials[i].test << '\t' << fmt(report.scores.scores[i]) << '\n';
    }
    if (!out) throw std::runtime_error("cannot write " + o.out);
  }
  return 0;
}

int run_sweep(const Options& o) {
  require(o.checkpoint, "--checkpoint");
  require(o.manifest, "--manifest");
  require(o.trials, "--trials");
  const std::vector<double> factors = parse_factors(o.factors);
  const CorpusManifest manifest = read_manifest(o.manifest);
  const std::vector<Trial> trials = read_trials(o.trials);
  FdnNetwork network = load_checkpoint(o.checkpoint);
  const std::vector<SweepRow> rows = perturbation_sweep(network, manifest, trials, factors);
  write_sweep_report(std::cout, rows);
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    write_sweep_report(out, rows);
    if (!out) throw std::runtime_error("cannot write " + o.out);
  }
  return 0;
}

int run_gradcheck(const Options& o) {
  GradSuiteOptions opts;
  if (o.seed) opts.seed = *o.seed;
  double worst = 0.0;
  for (const GradSuiteEntry& e : run_gradient_suite(opts)) {
    std::cout << e.name << '\t' << fmt(e.max_rel_error) << '\t' << e.coordinates << '\n';
    worst = std::max(worst, std::isfinite(e.max_rel_error) ? e.max_rel_error : INFINITY);
  }
  std::cout << "max_rel_error\t" << fmt(worst) << '\n';
  return worst < 1e-4 ? 0 : 2;
}

// Published totals (millions) for the light variant with 6112 speakers.
std::optional<double> reference_millions(const ModelConfig& c) {
  const ModelConfig base;
  if (c.variant != Variant::kLight || c.num_speakers != 6112 || c.channel_divisor != 1 ||
      c.front_channels != base.front_channels ||
      c.block1_channels != base.block1_channels ||
      c.block0_repeats != base.block0_repeats ||
      c.block1_repeats != base.block1_repeats || c.gru_hidden != base.gru_hidden ||
      c.embedding_dim != base.embedding_dim) {
    return std::nullopt;
  }
  switch (c.alpha) {
    case 2: return 13.33;
    case 4: return 13.15;
    case 8: return 13.06;
    case 16: return 13.01;
    case 32: return 12.99;
    default: return std::nullopt;
  }
}

int run_params(const Options& o) {
  const RunConfig rc = build_config(o);
  rc.model.validate();
  const std::size_t count = count_parameters(rc.model);
  std::cout << "variant\t" << to_string(rc.model.variant) << '\n'
            << "alpha\t" << rc.model.alpha << '\n'
            << "speakers\t" << rc.model.num_speakers << '\n'
            << "parameters\t" << count << '\n';
  if (const auto ref = reference_millions(rc.model)) {
    const double dev = (static_cast<double>(count) / (*ref * 1e6) - 1.0) * 100.0;
    std::cout << "reference_millions\t" << fmt(*ref) << '\n'
              << "deviation_percent\t" << fmt(dev) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FDN speaker verification toolkit", "fdnsv"};
  app.require_subcommand(1);
  Options o;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic speaker corpus");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a manifest");
  CLI::App* extract = app.add_subcommand("extract", "write one embedding file per utterance");
  CLI::App* eval = app.add_subcommand("eval", "score a trial list and report the EER");
  CLI::App* sweep = app.add_subcommand("sweep", "EER under speed perturbation of test utterances");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  CLI::App* params = app.add_subcommand("params", "count model parameters");
  for (CLI::App* cmd : {synth, train_cmd, extract, eval, sweep, gradcheck, params}) {
    add_common(cmd, o);
  }
  train_cmd->add_option("--manifest", o.manifest, "training manifest");
  for (CLI::App* cmd : {extract, eval, sweep}) {
    cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    cmd->add_option("--manifest", o.manifest, "utterance manifest");
  }
  for (CLI::App* cmd : {eval, sweep}) {
    cmd->add_option("--trials", o.trials, "trial list");
  }
  sweep->add_option("--factors", o.factors, "comma-separated speed factors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "fdnsv: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(o);
    if (train_cmd->parsed()) return run_train(o);
    if (extract->parsed()) return run_extract(o);
    if (eval->parsed()) return run_eval(o);
    if (sweep->parsed()) return run_sweep(o);
    if (gradcheck->parsed()) return run_gradcheck(o);
    if (params->parsed()) return run_params(o);
  } catch (const std::invalid_argument& e) {
    std::cerr << "fdnsv: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fdnsv: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
