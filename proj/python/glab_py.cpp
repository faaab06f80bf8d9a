// Copyright 2026 The GLAB Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "glab/defenses.hpp"
#include "glab/errors.hpp"
#include "glab/experiments.hpp"
#include "glab/metrics.hpp"
#include "glab/refiner.hpp"

namespace py = pybind11;
using namespace glab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor ToTensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor::Constant(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array ToArray(const Tensor& t) {
  Array out(t.shape());
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

GradientVector ToGradient(const std::vector<std::vector<double>>& layers) {
  return GradientVector{layers};
}

ExperimentConfig LoadConfig(const std::string& path, const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig cfg = ExperimentConfig::FromFile(ConfigFile::Load(path));
  if (!seeds.empty()) cfg.seeds = seeds;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_glab, m) {
  m.doc() = "Gradient leakage benchmark: metrics, defenses and experiment drivers.";

  // Translators run newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  m.def("psnr", [](const Array& x, const Array& y) { return Psnr(ToTensor(x), ToTensor(y)); },
        py::arg("x"), py::arg("y"));
  m.def("ssim", [](const Array& x, const Array& y) { return Ssim(ToTensor(x), ToTensor(y)).value; },
        py::arg("x"), py::arg("y"));
  m.def("pmm", &Pmm, py::arg("defense_acc"), py::arg("original_acc"));

  m.def("project_gradients",
        [](const std::vector<std::vector<double>>& g_star,
           const std::vector<std::vector<double>>& g, double epsilon) {
          return ProjectGradients(ToGradient(g_star), ToGradient(g), epsilon).layers;
        },
        py::arg("g_star"), py::arg("g"), py::arg("epsilon"));
  m.def("gq_quantize",
        [](const std::vector<std::vector<double>>& g, int bits) {
          return GqQuantize(ToGradient(g), bits).layers;
        },
        py::arg("g"), py::arg("bits"));
  m.def("dp_perturb",
        [](const std::vector<std::vector<double>>& g, const std::string& kind, double magnitude,
           double clip_norm, std::uint64_t seed) {
          const NoiseKind k = kind == "laplace" ? NoiseKind::kLaplace : NoiseKind::kGaussian;
          if (kind != "laplace" && kind != "gaussian") {
            throw ConfigError("noise kind must be gaussian or laplace");
          }
          return DpPerturb(ToGradient(g), k, magnitude, clip_norm, seed).layers;
        },
        py::arg("g"), py::arg("kind") = "gaussian", py::arg("magnitude"),
        py::arg("clip_norm") = 1.0, py::arg("seed") = 0);
  m.def("layer_weight", &LayerWeight, py::arg("tau"), py::arg("i"));

  m.def("synth_dataset",
        [](int classes, int per_class, std::int64_t channels, std::int64_t height,
           std::int64_t width, std::uint64_t seed) {
          Dataset d = SynthDataset(SynthOptions{classes, per_class, channels, height, width, seed});
          Shape shape{d.size()};
          shape.insert(shape.end(), d.image_shape.begin(), d.image_shape.end());
          Array images(shape);
          std::copy(d.pixels.begin(), d.pixels.end(), images.mutable_data());
          return py::make_tuple(images, d.labels);
        },
        py::arg("classes") = 10, py::arg("per_class") = 50, py::arg("channels") = 3,
        py::arg("height") = 16, py::arg("width") = 16, py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def_static("small_cnn",
                  [](std::int64_t classes, std::int64_t width, const Shape& input_shape,
                     const std::string& activation, std::uint64_t seed) {
                    SmallCnnOptions o;
                    o.input_shape = input_shape;
                    o.activation = ParseActivation(activation);
                    o.seed = seed;
                    return BuildSmallCnn(classes, width, o);
                  },
                  py::arg("classes") = 10, py::arg("width") = 1,
                  py::arg("input_shape") = Shape{3, 16, 16}, py::arg("activation") = "relu",
                  py::arg("seed") = 0)
      .def_static("load", &Model::Load, py::arg("path"))
      .def("save", &Model::Save, py::arg("path"))
      .def_property_readonly("num_parameters", &Model::num_parameters)
      .def("checksum", &Model::Checksum)
      .def("forward", [](const Model& model, const Array& x) {
        NoGrad no_grad;
        return ToArray(Forward(model, ToTensor(x)));
      })
      .def("gradients", [](const Model& model, const Array& x, const std::vector<int>& labels) {
        return ComputeGradients(model, ToTensor(x), labels).layers;
      });

  auto verb = [&](const char* name, void (*fn)(const ExperimentConfig&, const std::string&)) {
    m.def(name,
          [fn](const std::string& config, const std::string& out,
               const std::vector<std::uint64_t>& seeds) {
            py::gil_scoped_release release;
            fn(LoadConfig(config, seeds), out);
          },
          py::arg("config"), py::arg("out"), py::arg("seeds") = std::vector<std::uint64_t>{});
  };
  verb("tradeoff", &CmdTradeoff);
  verb("ablation", &CmdAblation);
  verb("timing", &CmdTiming);
  verb("validate_weights", &CmdValidateWeights);
  verb("attack_demo", &CmdAttackDemo);
  verb("train_evalnet", &CmdTrainEvalNet);
}
