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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "fdnsv/audio.h"
#include "fdnsv/checkpoint.h"
#include "fdnsv/evaluation.h"
#include "fdnsv/grad_suite.h"
#include "fdnsv/model.h"
#include "fdnsv/run_config.h"
#include "fdnsv/training.h"

namespace py = pybind11;
using namespace fdnsv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

Array to_array(std::span<const double> v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict corpus_dict(const SyntheticCorpus& c) {
  auto entries = [](const CorpusManifest& m) {
    py::list out;
    for (const ManifestEntry& e : m) out.append(py::make_tuple(e.utterance_id, e.speaker_id, e.path));
    return out;
  };
  py::dict d;
  d["train"] = entries(c.train);
  d["test"] = entries(c.test);
  return d;
}

}  // namespace

PYBIND11_MODULE(fdnsv, m) {
  m.doc() = "FDN speaker verification: models, training and scoring";

  py::register_exception<WavError>(m, "WavError", PyExc_ValueError);

  py::enum_<Variant>(m, "Variant")
      .value("LIGHT", Variant::kLight)
      .value("HEAVY", Variant::kHeavy);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_static("tiny", &ModelConfig::tiny, py::arg("variant") = Variant::kLight)
      .def_readwrite("variant", &ModelConfig::variant)
      .def_readwrite("alpha", &ModelConfig::alpha)
      .def_readwrite("num_speakers", &ModelConfig::num_speakers)
      .def_readwrite("crop_samples", &ModelConfig::crop_samples)
      .def_readwrite("channel_divisor", &ModelConfig::channel_divisor)
      .def_readwrite("leaky_slope", &ModelConfig::leaky_slope)
      .def("total_stride", &ModelConfig::total_stride)
      .def("validate", &ModelConfig::validate)
      .def("set", [](ModelConfig& c, const std::string& key, const std::string& value) {
        apply_config_entry(c, key, value);
      })
      .def("__repr__", [](const ModelConfig& c) { return "ModelConfig(\n" + config_to_text(c) + ")"; });

  m.def("count_parameters", &count_parameters, py::arg("config"));

  py::class_<FdnNetwork>(m, "Network")
      .def(py::init([](const ModelConfig& c, std::uint64_t seed) {
             FdnNetwork net(c);
             net.initialize(seed);
             return net;
           }),
           py::arg("config"), py::arg("seed") = 1)
      .def_property_readonly("config", &FdnNetwork::config)
      .def("parameter_count", &FdnNetwork::parameter_count)
      .def(
          "forward",
          [](FdnNetwork& net, const Array& wave, bool train) {
            std::vector<double> v = to_vector(wave);
            const std::size_t n = v.size();
            NoGradGuard guard;
            ForwardResult r = net.forward(Tensor({1, n}, std::move(v)),
                                          train ? Mode::kTrain : Mode::kEval);
            py::list shapes;
            for (const Shape& s : r.stage_shapes) shapes.append(py::tuple(py::cast(s)));
            return py::make_tuple(to_array(r.embedding.data()), to_array(r.logits.data()),
                                  shapes);
          },
          py::arg("wave"), py::arg("train") = false,
          "Returns (embedding, logits, stage_shapes) for one raw waveform.")
      .def(
          "embed",
          [](FdnNetwork& net, const Array& wave, double pre_emphasis_coeff) {
            Waveform w;
            w.samples = to_vector(wave);
            Embedding e = extract_embedding(net, w, pre_emphasis_coeff);
            return to_array(e);
          },
          py::arg("wave"), py::arg("pre_emphasis") = 0.97)
      .def("save", [](const FdnNetwork& net, const std::string& path) { save_checkpoint(path, net); })
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); });

  m.def(
      "read_wav",
      [](const std::string& path) {
        Waveform w = read_wav(path);
        return py::make_tuple(to_array(w.samples), w.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::string& path, const Array& samples, std::uint32_t rate, bool as_float) {
        Waveform w;
        w.samples = to_vector(samples);
        w.sample_rate = rate;
        write_wav(path, w, as_float ? WavEncoding::kFloat32 : WavEncoding::kPcm16);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000,
      py::arg("float32") = false);

  m.def(
      "synthesize_corpus",
      [](const std::string& out_dir, std::size_t num_speakers, std::size_t train_utterances,
         std::size_t test_utterances, std::size_t length, std::uint64_t seed) {
        SyntheticCorpusOptions o;
        o.num_speakers = num_speakers;
        o.train_utterances = train_utterances;
        o.test_utterances = test_utterances;
        o.length = length;
        o.seed = seed;
        return corpus_dict(generate_synthetic_corpus(o, out_dir));
      },
      py::arg("out_dir"), py::arg("num_speakers") = 8, py::arg("train_utterances") = 10,
      py::arg("test_utterances") = 4, py::arg("length") = 2187, py::arg("seed") = 1);

  m.def(
      "train",
      [](FdnNetwork& net, const std::string& manifest, std::size_t epochs,
         std::size_t batch_size, std::uint64_t seed, double lr) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        cfg.optimizer.lr = lr;
        std::vector<EpochStats> log;
        {
          py::gil_scoped_release release;
          log = train(net, load_training_set(read_manifest(manifest)), cfg);
        }
        py::list out;
        for (const EpochStats& s : log) out.append(py::make_tuple(s.epoch, s.mean_loss, s.accuracy));
        return out;
      },
      py::arg("network"), py::arg("manifest"), py::arg("epochs") = 40,
      py::arg("batch_size") = 4, py::arg("seed") = 1, py::arg("lr") = 1e-3,
      "Trains in place; returns [(epoch, mean_loss, accuracy), ...].");

  m.def(
      "compute_eer",
      [](const Array& scores, const std::vector<bool>& is_target) {
        ScoreSet s;
        s.scores = to_vector(scores);
        s.is_target = is_target;
        EerResult r = compute_eer(s);
        return py::make_tuple(r.eer, r.threshold);
      },
      py::arg("scores"), py::arg("is_target"), "Returns (eer, threshold).");

  m.def(
      "cosine_score",
      [](const Array& a, const Array& b) { return cosine_score(to_vector(a), to_vector(b)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "evaluate",
      [](FdnNetwork& net, const std::string& manifest, const std::string& trials,
         const std::vector<double>& factors) {
        CorpusManifest man = read_manifest(manifest);
        std::vector<Trial> t = read_trials(trials);
        py::list out;
        for (const SweepRow& row : perturbation_sweep(net, man, t, factors)) {
          out.append(py::make_tuple(row.factor, row.eer.eer, row.eer.threshold));
        }
        return out;
      },
      py::arg("network"), py::arg("manifest"), py::arg("trials"),
      py::arg("speed_factors") = std::vector<double>{1.0},
      "Returns [(factor, eer, threshold), ...].");

  m.def(
      "gradient_check",
      [](std::uint64_t seed, bool include_networks) {
        GradSuiteOptions o;
        o.seed = seed;
        o.include_networks = include_networks;
        py::list out;
        for (const GradSuiteEntry& e : run_gradient_suite(o)) {
          out.append(py::make_tuple(e.name, e.max_rel_error, e.coordinates, e.excluded));
        }
        return out;
      },
      py::arg("seed") = 7, py::arg("include_networks") = true,
      "Returns [(name, max_rel_error, coordinates, excluded), ...].");
}
