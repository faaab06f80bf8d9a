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


// Acceptance run: one PASS/FAIL line per criterion. Usage:
//   glab_acceptance [--work-dir DIR] [--only 1,5,12]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/test_util.hpp"
#include "glab/attacks.hpp"
#include "glab/errors.hpp"
#include "glab/experiments.hpp"
#include "glab/metrics.hpp"
#include "glab/ops.hpp"
#include "glab/refiner.hpp"

namespace fs = std::filesystem;
using namespace glab;
using glab::testing::MaxRelError;
using glab::testing::NumericGradient;
using glab::testing::RandomLeaf;
using glab::testing::RandomValues;
using glab::testing::ToVector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path g_work;

std::string Fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

ExperimentConfig LoadConfig(const std::string& name,
                            const std::map<std::string, std::string>& overrides = {}) {
  ConfigFile file = ConfigFile::Load(std::string(GLAB_SOURCE_DIR) + "/tools/configs/" + name);
  for (const auto& [k, v] : overrides) file.Set(k, v);
  ExperimentConfig cfg = ExperimentConfig::FromFile(file);
  cfg.evalnet_cache_dir = (g_work / "cache").string();
  return cfg;
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Coefficient of determination of the least-squares line through (x, y).
double RSquared(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = Mean(x), my = Mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
}

// ------------------------------------------------------------ criterion 1

using UnaryOp = std::function<Tensor(const Tensor&)>;

double FirstOrderError(const UnaryOp& op, const Shape& shape, std::uint64_t seed,
                       double lo, double hi) {
  Tensor x = RandomLeaf(shape, seed, lo, hi);
  Tensor y = op(x);
  Tensor r = Tensor::Constant(y.shape(), RandomValues(y.numel(), seed + 1));
  std::vector<double> analytic = ToVector(Grad(ops::Sum(ops::Mul(y, r)), {x})[0]);
  auto f = [&](const std::vector<double>& v) {
    NoGrad no_grad;
    return ops::Sum(ops::Mul(op(Tensor::Constant(shape, v)), r)).item();
  };
  return MaxRelError(analytic, NumericGradient(f, ToVector(x)));
}

Outcome Autodiff() {
  const std::vector<int> labels{0, 2, 1};
  Tensor w = Tensor::Constant({4, 5}, RandomValues(20, 7));
  Tensor cw = Tensor::Constant({2, 3, 3, 3}, RandomValues(54, 8));
  Tensor other = Tensor::Constant({3, 4}, RandomValues(12, 9));
  Tensor bias = Tensor::Constant({2}, RandomValues(2, 10));
  struct Case {
    UnaryOp op;
    Shape shape;
    double lo = -1.0, hi = 1.0;
  };
  const std::vector<Case> cases{
      {[&](const Tensor& x) { return ops::MatMul(x, w); }, {3, 4}},
      {[&](const Tensor& x) { return ops::MatMul(other, x); }, {4, 2}},
      {[&](const Tensor& x) { return ops::Transpose(x); }, {3, 4}},
      {[&](const Tensor& x) { return ops::Conv2d(x, cw, {1, 1}); }, {2, 3, 5, 5}},
      {[&](const Tensor& x) { return ops::Conv2d(x, cw, {2, 2}); }, {1, 3, 7, 7}},
      {[&](const Tensor& x) {
         return ops::Conv2d(Tensor::Constant({1, 3, 5, 5}, RandomValues(75, 11)), x, {1, 1});
       },
       {2, 3, 3, 3}},
      {[&](const Tensor& x) { return ops::AddChannelBias(x, bias); }, {2, 2, 3, 3}},
      {[&](const Tensor& x) {
         return ops::AddChannelBias(Tensor::Constant({2, 2, 3, 3}, RandomValues(36, 12)), x);
       },
       {2}},
      {[](const Tensor& x) { return ops::Relu(x); }, {3, 4}},
      {[](const Tensor& x) { return ops::Sigmoid(x); }, {3, 4}},
      {[](const Tensor& x) { return ops::Exp(x); }, {6}},
      {[](const Tensor& x) { return ops::Log(x); }, {6}, 0.5, 2.0},
      {[](const Tensor& x) { return ops::Sqrt(x); }, {6}, 0.5, 2.0},
      {[](const Tensor& x) { return ops::Reciprocal(x); }, {6}, 0.5, 2.0},
      {[](const Tensor& x) { return ops::Square(x); }, {6}},
      {[&](const Tensor& x) { return ops::Mul(x, other); }, {3, 4}},
      {[&](const Tensor& x) { return ops::Div(other, ops::AddScalar(ops::Square(x), 1.0)); }, {3, 4}},
      {[&](const Tensor& x) { return ops::SoftmaxCrossEntropy(x, labels); }, {3, 4}},
      {[](const Tensor& x) { return ops::Softmax(x); }, {3, 4}},
      {[](const Tensor& x) { return ops::LogSoftmax(x); }, {3, 4}},
      {[&](const Tensor& x) { return ops::Mse(x, other); }, {3, 4}},
      {[&](const Tensor& x) { return ops::CosineDistance({x}, {other}); }, {3, 4}},
      {[&](const Tensor& x) { return ops::SquaredDistance({x}, {other}); }, {3, 4}},
      {[](const Tensor& x) { return ops::TotalVariation(x); }, {1, 2, 4, 4}},
      {[](const Tensor& x) { return ops::Narrow(x, 1, 1, 2); }, {3, 4}},
      {[](const Tensor& x) { return ops::Reshape(x, {4, 3}); }, {3, 4}},
      {[](const Tensor& x) { return ops::Sum(x); }, {3, 4}},
      {[](const Tensor& x) { return ops::Mean(x); }, {3, 4}},
  };
  double first = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    first = std::max(first, FirstOrderError(cases[i].op, cases[i].shape, 100 + i,
                                            cases[i].lo, cases[i].hi));
  }
  double second = 0.0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SmallCnnOptions o;
    o.input_shape = {1, 12, 12};
    o.activation = seed % 2 ? Activation::kRelu : Activation::kSigmoid;
    o.seed = seed;
    Model cnn = BuildSmallCnn(3, 1, o);
    const std::vector<int> y{static_cast<int>(seed % 3)};
    auto target = ToParameterTensors(
        cnn, ComputeGradients(cnn, Tensor::Constant({1, 1, 12, 12}, RandomValues(144, 40 + seed, 0, 1)), y));
    auto loss_fn = [&](const Tensor& logits) { return ops::SoftmaxCrossEntropy(logits, y); };
    std::function<Tensor(const std::vector<Tensor>&)> match =
        seed < 2 ? std::function<Tensor(const std::vector<Tensor>&)>(
                       [&](const std::vector<Tensor>& g) { return ops::SquaredDistance(g, target); })
                 : [&](const std::vector<Tensor>& g) { return ops::CosineDistance(g, target); };
    Tensor x = RandomLeaf({1, 1, 12, 12}, 50 + seed, 0.0, 1.0);
    SecondOrderResult r = GradThroughGrad(cnn, loss_fn, x, match);
    auto f = [&](const std::vector<double>& v) {
      return GradThroughGrad(cnn, loss_fn, Tensor::Leaf({1, 1, 12, 12}, v), match).value;
    };
    second = std::max(second, MaxRelError(ToVector(r.grads[0]), NumericGradient(f, ToVector(x))));
  }
  return {first < 1e-4 && second < 1e-3,
          std::to_string(cases.size()) + " primitives, first-order max rel err " +
              Fmt("%.2e", first) + ", second-order " + Fmt("%.2e", second)};
}

// ------------------------------------------------------------ criterion 2

Outcome QFunction() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Model net = seed % 2 ? BuildMlp({8, 6, 4}, seed, Activation::kSigmoid)
                         : BuildMlp({8, 5, 5, 4}, seed, Activation::kRelu);
    Batch b{Tensor::Constant({3, 8}, RandomValues(24, 1000 + seed, 0, 1)), {0, 3, 1}};
    const double h = 1e-5;
    auto q = [&](double u) {
      NoGrad no_grad;
      return Loss(net.Scaled(u), b).item();
    };
    const double fd = (q(1 + h) - q(1 - h)) / (2 * h);
    const double got = QFunctionDerivative(net, b);
    worst = std::max(worst, std::abs(got - fd) / std::max(std::abs(fd), 1e-12));
  }
  return {worst < 1e-4, "20 nets, max rel err " + Fmt("%.2e", worst)};
}

// ------------------------------------------------------------ criterion 3

Outcome ProjectionCheck() {
  Rng rng(3);
  int ball = 0, closest = 0;
  const int n = 10000;
  for (int t = 0; t < n; ++t) {
    const std::size_t a = 1 + rng.UniformInt(6), b = 1 + rng.UniformInt(6);
    auto vec = [&](double scale) {
      GradientVector g{{std::vector<double>(a), std::vector<double>(b)}};
      for (auto& l : g.layers) for (auto& v : l) v = scale * rng.Normal();
      return g;
    };
    GradientVector g = vec(1.0), gs = g + vec(std::exp(rng.Uniform(-4, 2)));
    const double eps = std::exp(rng.Uniform(-5, 1));
    GradientVector p = ProjectGradients(gs, g, eps);
    if (Distance(p, g) <= eps + 1e-12) ++ball;
    const double d = Distance(p, gs);
    bool ok = true;
    for (int z = 0; z < 10; ++z) {
      GradientVector dir = vec(1.0);
      const double r = eps * std::pow(rng.Uniform(), 1.0 / static_cast<double>(a + b));
      GradientVector cand = g + dir * (r / std::max(dir.Norm(), 1e-300));
      if (d > Distance(cand, gs) + 1e-12) ok = false;
    }
    if (ok) ++closest;
  }
  return {ball == n && closest == n,
          std::to_string(ball) + "/" + std::to_string(n) + " inside the ball, " +
              std::to_string(closest) + "/" + std::to_string(n) + " closer than 10 sampled points"};
}

// ------------------------------------------------------------ criterion 4

Outcome EvalNetQualityCheck() {
  Workbench bench = Workbench::Create(LoadConfig("desk.conf"));
  const auto start = std::chrono::steady_clock::now();
  bench.EnsureEvalNet((g_work / "cache").string());
  const double train_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EvalNetQuality q = EvaluateEvalNet(*bench.evalnet, bench.test, 404);
  return {q.mean_abs_error <= 0.1 && q.monotone_fraction >= 0.95 && train_s < 900.0,
          "held-out MAE " + Fmt("%.4f", q.mean_abs_error) + ", monotone " +
              Fmt("%.3f", q.monotone_fraction) + ", training " + Fmt("%.0f", train_s) + " s"};
}

// ------------------------------------------------------------ criteria 5, 6

std::map<std::pair<std::string, double>, double> g_validation;

void EnsureValidation() {
  if (!g_validation.empty()) return;
  Workbench bench = Workbench::Create(LoadConfig("validate.conf"));
  std::map<std::pair<std::string, double>, std::vector<double>> acc;
  for (const auto& c : RunValidateWeights(bench)) acc[{c.name, c.strength}].push_back(c.accuracy);
  for (const auto& [k, v] : acc) g_validation[k] = Mean(v);
}

Outcome PruningOrder() {
  EnsureValidation();
  bool ok = true;
  std::string detail = "none " + Fmt("%.3f", g_validation[{"none", 0.0}]) + ";";
  for (double rate : {0.2, 0.4, 0.6, 0.8}) {
    const double ours = g_validation[{"prune_weight_grad_product", rate}];
    const double grad = g_validation[{"prune_grad", rate}];
    const double weight = g_validation[{"prune_weight", rate}];
    ok = ok && ours >= grad && grad >= weight;
    if (rate >= 0.4) ok = ok && ours - weight > 0.0;
    detail += " rate " + Fmt("%.1f", rate) + ": product " + Fmt("%.3f", ours) + " grad " +
              Fmt("%.3f", grad) + " weight " + Fmt("%.3f", weight) + ";";
  }
  return {ok, detail};
}

Outcome LayerNoise() {
  EnsureValidation();
  double first = 0.0, last = 0.0;
  for (const auto& [k, v] : g_validation) {
    if (k.first == "noise_layer1") first = v;
    if (k.first == "noise_last_layer") last = v;
  }
  return {first <= last, "accuracy with layer-1 noise " + Fmt("%.3f", first) +
                             ", last-layer noise " + Fmt("%.3f", last)};
}

// ------------------------------------------------------------ criterion 7

Outcome AttackSanity() {
  ExperimentConfig cfg = LoadConfig("desk.conf");
  Workbench bench = Workbench::Create(cfg);
  AttackConfig attack = cfg.attack;
  attack.restarts = 3;
  int good = 0;
  double worst = 1e9;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const Model model = bench.InitialModel(t);
    Rng rng(DeriveSeed(7000, {t}));
    const std::vector<std::int64_t> pick{static_cast<std::int64_t>(rng.UniformInt(bench.train.size()))};
    Batch b = bench.train.MakeBatch(pick);
    attack.seed = DeriveSeed(7001, {t});
    ReconstructionResult r = GradientMatchAttack(model, ComputeGradients(model, b), attack, 1);
    const double p = CappedPsnr(Psnr(r.x_hat, b.inputs));
    worst = std::min(worst, p);
    if (p >= 25.0) ++good;
  }
  int labels_ok = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const Model model = bench.InitialModel(10000 + t);
    Rng rng(DeriveSeed(7100, {t}));
    const std::vector<std::int64_t> pick{static_cast<std::int64_t>(rng.UniformInt(bench.train.size()))};
    Batch b = bench.train.MakeBatch(pick);
    LabelInference li = InferLabels(model, ComputeGradients(model, b), 1);
    if (!li.fallback && li.labels == b.labels) ++labels_ok;
  }
  return {good >= 16 && labels_ok == 200,
          "PSNR >= 25 on " + std::to_string(good) + "/20 (min " + Fmt("%.1f", worst) +
              " dB), labels " + std::to_string(labels_ok) + "/200"};
}

// ------------------------------------------------------------ criterion 8

Outcome RefinerPrivacy() {
  ExperimentConfig cfg = LoadConfig("desk.conf");
  cfg.ablation_knob = "alpha";
  cfg.ablation_values = {0.0, 0.3, 0.5, 0.9};
  cfg.ablation_train = false;
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet((g_work / "cache").string());
  std::map<double, std::vector<double>> by_alpha;
  for (const auto& r : RunAblation(bench)) {
    if (r.psnr) by_alpha[r.strength].push_back(*r.psnr);
  }
  std::vector<double> means;
  std::string detail = "PSNR by alpha:";
  for (const auto& [a, v] : by_alpha) {
    means.push_back(Mean(v));
    detail += " " + Fmt("%.1f", a) + "->" + Fmt("%.2f", means.back());
  }
  int inversions = 0;
  for (std::size_t i = 1; i < means.size(); ++i) inversions += means[i] > means[i - 1] ? 1 : 0;
  const bool monotone = means.size() == 4 && inversions <= 1;

  // Defaults: accuracy cost and attack PSNR against the undefended run.
  ExperimentConfig dcfg = LoadConfig("desk.conf");
  const double eps = dcfg.refiner.epsilon;
  dcfg.sweep = {SweepEntry{DefenseKind::kNone, {0.0}}, SweepEntry{DefenseKind::kRefiner, {eps}}};
  dcfg.seeds = {0, 1, 2};
  Workbench dbench = Workbench::Create(dcfg);
  dbench.evalnet = bench.evalnet;
  std::vector<double> psnr_none, psnr_ref, pmm;
  for (const auto& r : RunTradeoff(dbench)) {
    if (!r.error.empty()) continue;
    if (r.defense == "none") {
      psnr_none.push_back(*r.psnr);
    } else {
      psnr_ref.push_back(*r.psnr);
      pmm.push_back(*r.pmm);
    }
  }
  const double drop = Mean(psnr_none) - Mean(psnr_ref);
  const bool defaults_ok = psnr_ref.size() == 3 && drop >= 5.0 && Mean(pmm) >= 85.0;
  detail += "; defaults (eps " + Fmt("%g", eps) + "): undefended " + Fmt("%.2f", Mean(psnr_none)) +
            " dB, refiner " + Fmt("%.2f", Mean(psnr_ref)) + " dB, PMM " + Fmt("%.1f", Mean(pmm));
  return {monotone && defaults_ok, detail};
}

// ------------------------------------------------------------ criterion 9

Outcome PrivacyBound() {
  ExperimentConfig cfg = LoadConfig("desk.conf");
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet((g_work / "cache").string());
  RefinerConfig rc = cfg.refiner;
  rc.alpha = 0.5;
  std::vector<double> attack_mse, robust_mse;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Model model = bench.InitialModel(t % 5);
    Rng rng(DeriveSeed(9000, {t}));
    const std::vector<std::int64_t> pick{static_cast<std::int64_t>(rng.UniformInt(bench.train.size()))};
    Batch b = bench.train.MakeBatch(pick);
    AttackConfig attack = cfg.attack;
    attack.seed = DeriveSeed(9001, {t});
    ReconstructionResult r = GradientMatchAttack(model, ComputeGradients(model, b), attack, 1);
    attack_mse.push_back(Mse(r.x_hat.values(), b.inputs.values()));
    rc.seed = DeriveSeed(9002, {t});
    RefineResult refined = Refine(model, &*bench.evalnet, b, rc);
    robust_mse.push_back(Mse(refined.x_star.values(), b.inputs.values()));
  }
  const double sigma = Mean(attack_mse), robust = Mean(robust_mse);
  return {sigma < robust, "100 samples: attack-on-clean MSE " + Fmt("%.5f", sigma) +
                              " < MSE(x*, x) at alpha 0.5 " + Fmt("%.5f", robust)};
}

// ------------------------------------------------------------ criterion 10

Outcome Convergence() {
  ExperimentConfig cfg = LoadConfig("desk.conf", {{"model.activation", "relu"},
                                                  {"fl.lr", "0.1"},
                                                  {"fl.rounds", "150"}});
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet((g_work / "cache").string());
  std::map<double, std::vector<double>> loss;
  std::vector<double> none_acc;
  for (auto seed : cfg.seeds) {
    TrainingResult none = RunTraining(bench.InitialModel(seed), bench.train, bench.test,
                                      bench.FlFor(bench.Defense(DefenseKind::kNone, 0.0), seed));
    none_acc.push_back(none.history.final_accuracy());
    for (double eps : {0.05, 0.5}) {
      TrainingResult r = RunTraining(bench.InitialModel(seed), bench.train, bench.test,
                                     bench.FlFor(bench.Defense(DefenseKind::kRefiner, eps), seed),
                                     &*bench.evalnet);
      loss[eps].push_back(r.history.tail_loss(10));
    }
  }
  const double small = Mean(loss[0.05]), large = Mean(loss[0.5]), acc = Mean(none_acc);
  return {small <= large && acc >= 0.8,
          "final loss eps 0.05 " + Fmt("%.4f", small) + ", eps 0.5 " + Fmt("%.4f", large) +
              "; undefended accuracy " + Fmt("%.3f", acc)};
}

// ------------------------------------------------------------ criterion 11

Outcome Timing() {
  ExperimentConfig cfg = LoadConfig("desk.conf");
  cfg.seeds = {0};
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet((g_work / "cache").string());
  std::vector<double> w, tw, iota, ti;
  std::map<std::string, double> per_kind;
  double refiner_default = 0.0;
  for (const auto& r : RunTiming(bench)) {
    if (r.defense == "soteria_width") {
      w.push_back(r.strength);
      tw.push_back(*r.time_s);
    } else if (r.defense == "refiner_iota") {
      iota.push_back(r.strength);
      ti.push_back(*r.time_s);
      if (r.strength == cfg.refiner.iterations) refiner_default = *r.time_s;
    } else if (r.defense == "refiner") {
      refiner_default = *r.time_s;
    } else if (r.defense != "none") {
      per_kind[r.defense] = *r.time_s;
    }
  }
  const double r2_width = RSquared(w, tw), r2_iota = RSquared(iota, ti);
  bool cheap = refiner_default > 0.0;
  std::string detail = "R^2 width " + Fmt("%.4f", r2_width) + ", R^2 iterations " +
                       Fmt("%.4f", r2_iota) + "; refiner " + Fmt("%.4f", refiner_default) + " s";
  for (const char* k : {"dp_gaussian", "gq", "prune"}) {
    const auto it = per_kind.find(k);
    const bool found = it != per_kind.end();
    cheap = cheap && found && it->second < 0.1 * refiner_default;
    detail += ", " + std::string(k) + " " + (found ? Fmt("%.5f", it->second) : "missing") + " s";
  }
  return {r2_width >= 0.95 && r2_iota >= 0.95 && cheap, detail};
}

// ------------------------------------------------------------ criterion 12

std::string Slurp(const fs::path& p, bool drop_last_column) {
  std::ifstream in(p, std::ios::binary);
  if (!drop_last_column) {
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome Determinism() {
  const std::string config = std::string(GLAB_SOURCE_DIR) + "/tools/configs/desk.conf";
  const std::string common =
      " --config " + config + " --seeds 0,1" +
      " --set evalnet.cache_dir=" + (g_work / "cache").string() +
      " --set fl.rounds=6 --set attack.iterations=20 --set sweep.defenses=none,dp_gaussian,gq,prune,refiner" +
      " --set sweep.refiner=0.1 --set sweep.dp_gaussian=0.01 --set sweep.gq=4 --set sweep.prune=0.5" +
      " --set ablation.values=0,0.5 --set validate.rates=0.4 --set timing.reps=2 --set timing.warmup=0" +
      " --set timing.widths=32,64 --set timing.iterations=2,4 --set evalnet.epochs=2";
  int files = 0;
  std::vector<std::string> differ;
  for (const char* verb :
       {"tradeoff", "ablation", "timing", "validate-weights", "attack-demo", "train-evalnet"}) {
    for (const char* run : {"a", "b"}) {
      const fs::path out = g_work / "determinism" / run / verb;
      fs::remove_all(out);
      const std::string cmd = std::string("\"") + GLAB_CLI_PATH + "\" " + verb + common +
                              " --out " + out.string() + " > " + out.string() + ".log 2>&1";
      fs::create_directories(out.parent_path());
      if (std::system(cmd.c_str()) != 0) {
        return {false, std::string(verb) + " failed; see " + out.string() + ".log"};
      }
    }
    for (const auto& entry : fs::directory_iterator(g_work / "determinism" / "a" / verb)) {
      if (entry.path().extension() != ".csv") continue;
      const bool timed = entry.path().filename() == "timing.csv";
      const fs::path other = g_work / "determinism" / "b" / verb / entry.path().filename();
      ++files;
      if (!fs::exists(other) || Slurp(entry.path(), timed) != Slurp(other, timed)) {
        differ.push_back(std::string(verb) + "/" + entry.path().filename().string());
      }
    }
  }
  std::string detail = std::to_string(files) + " CSV files compared across 6 verbs";
  for (const auto& d : differ) detail += "; differs: " + d;
  return {differ.empty() && files >= 6, detail};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = fs::temp_directory_path() / "glab_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      g_work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      for (auto v : ParseSeedList(argv[++i])) only.insert(static_cast<int>(v));
    } else {
      std::fprintf(stderr, "usage: glab_acceptance [--work-dir DIR] [--only 1,2,...]\n");
      return 2;
    }
  }
  if (only.empty()) fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime bound
    Outcome (*run)();
  };
  const std::vector<Criterion> criteria{
      {1, "autodiff matches finite differences", 60, Autodiff},
      {2, "q-function derivative", 0, QFunction},
      {3, "projection ball and closest point", 60, ProjectionCheck},
      {4, "evaluation network quality", 0, EvalNetQualityCheck},
      {5, "pruning strategy ordering", 1800, PruningOrder},
      {6, "layer-1 noise hurts at least as much as last-layer noise", 900, LayerNoise},
      {7, "attack sanity on undefended gradients", 1200, AttackSanity},
      {8, "refiner privacy trend and defaults", 2700, RefinerPrivacy},
      {9, "attack-on-clean error below robust-data error", 0, PrivacyBound},
      {10, "convergence improves with smaller epsilon", 1800, Convergence},
      {11, "timing contracts", 900, Timing},
      {12, "cli output is byte-identical across runs", 0, Determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && s >= c.limit_s) {
      o.pass = false;
      o.detail += "; exceeded " + Fmt("%.0f", c.limit_s) + " s";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s: %s (%.1f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, s,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
