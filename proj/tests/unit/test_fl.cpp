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


#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "glab/data.hpp"
#include "glab/errors.hpp"
#include "glab/fl.hpp"
#include "test_util.hpp"

using namespace glab;
using glab::testing::RandomValues;

namespace {

Dataset Tiny(std::int64_t n, std::uint64_t seed) {
  Dataset d;
  d.name = "tiny";
  d.image_shape = {1, 2, 3};
  d.num_classes = 3;
  d.pixels = RandomValues(n * 6, seed, 0, 1);
  for (std::int64_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % 3));
  return d;
}

Model TinyModel(std::uint64_t seed) {
  Model m = BuildMlp({6, 4, 3}, seed, Activation::kSigmoid);
  return Model({1, 2, 3}, m.layers());
}

}  // namespace

TEST_SUITE("fl") {

TEST_CASE("aggregate") {
  GradientVector a{{{1, 3}}}, b{{{3, 1}}};
  CHECK(Aggregate({a}).layers == a.layers);
  CHECK(Aggregate({a, b}).layers[0] == std::vector<double>{2, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<GradientVector> gs;
    const int k = 1 + static_cast<int>(seed % 5);
    for (int i = 0; i < k; ++i) {
      gs.push_back(GradientVector{{RandomValues(7, seed * 10 + i), RandomValues(3, seed * 10 + i + 5)}});
    }
    GradientVector mean = Aggregate(gs);
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t e = 0; e < gs[0].layers[l].size(); ++e) {
        double s = 0.0;
        for (const auto& g : gs) s += g.layers[l][e];
        CHECK(mean.layers[l][e] == doctest::Approx(s / k).epsilon(1e-14));
      }
    }
  }
  CHECK_THROWS_AS(Aggregate({a, GradientVector{{{1, 2, 3}}}}), ShapeError);
  CHECK_THROWS(Aggregate({}));
}

TEST_CASE("one client round applies -lr * g") {
  Dataset d = Tiny(8, 1);
  Model init = TinyModel(2);
  FlConfig cfg;
  cfg.num_clients = 1;
  cfg.clients_per_round = 1;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.3;
  FlState state = InitState(init, d, cfg);
  std::vector<std::int64_t> all{0, 1, 2, 3, 4, 5, 6, 7};
  GradientVector g = ComputeGradients(init, d.MakeBatch(all));
  RoundReport report = RunRound(state, d, cfg);
  CHECK(report.clients == std::vector<int>{0});
  CHECK(state.round == 1);
  GradientVector want = init.ParameterValues() - g * 0.3;
  CHECK(Distance(state.server.model().ParameterValues(), want) < 1e-12);
}

TEST_CASE("federated averaging equals centralized sgd on identical clients") {
  // Every sample is the same image and label, so each client's batch
  // gradient equals the pooled gradient.
  Dataset d;
  d.image_shape = {1, 2, 3};
  d.num_classes = 3;
  auto img = RandomValues(6, 3, 0, 1);
  for (int i = 0; i < 12; ++i) {
    d.pixels.insert(d.pixels.end(), img.begin(), img.end());
    d.labels.push_back(1);
  }
  FlConfig cfg;
  cfg.num_clients = 4;
  cfg.clients_per_round = 4;
  cfg.batch_size = 3;
  cfg.learning_rate = 0.5;
  Model central = TinyModel(4);
  FlState state = InitState(central, d, cfg);
  std::vector<std::int64_t> pooled(12);
  for (int i = 0; i < 12; ++i) pooled[i] = i;
  for (int r = 0; r < 5; ++r) {
    RunRound(state, d, cfg);
    central.ApplyUpdate(ComputeGradients(central, d.MakeBatch(pooled)), 0.5);
  }
  CHECK(Distance(state.server.model().ParameterValues(), central.ParameterValues()) < 1e-10);
}

TEST_CASE("failing clients are skipped") {
  Dataset d = Tiny(30, 5);
  FlConfig cfg;
  cfg.num_clients = 3;
  cfg.clients_per_round = 3;
  cfg.batch_size = 4;
  auto calls = std::make_shared<int>(0);
  cfg.upload_hook = [calls](GradientVector&, std::uint64_t) {
    if ((*calls)++ == 0) throw NumericError("injected");
  };
  FlState state = InitState(TinyModel(1), d, cfg);
  RoundReport report = RunRound(state, d, cfg);
  CHECK(report.clients.size() == 2);
  REQUIRE(report.skipped.size() == 1);
  CHECK(report.skipped[0].find("injected") != std::string::npos);
  CHECK(state.round == 1);

  cfg.upload_hook = [](GradientVector& g, std::uint64_t) { g.layers[0][0] = std::nan(""); };
  CHECK_THROWS_AS(RunRound(state, d, cfg), Error);
}

TEST_CASE("refiner uploads stay in the epsilon ball") {
  Dataset d = Tiny(12, 7);
  Model m = TinyModel(3);
  std::vector<std::int64_t> idx{0, 1, 2, 3};
  Batch b = d.MakeBatch(idx);
  GradientVector g = ComputeGradients(m, b);
  for (double eps : {0.001, 0.05, 0.5}) {
    DefenseConfig c;
    c.kind = DefenseKind::kRefiner;
    c.strength = eps;
    c.refiner.beta = 0.0;
    c.refiner.iterations = 3;
    DefenseOutcome out = ApplyDefense(m, b, c);
    CHECK(Distance(out.uploaded, g) <= eps + 1e-12);
    REQUIRE(out.refine.has_value());
  }
}

TEST_CASE("training is deterministic and learns") {
  SynthOptions o;
  o.num_classes = 3;
  o.n_per_class = 40;
  o.channels = 1;
  o.height = 8;
  o.width = 8;
  o.seed = 2;
  Split split = StratifiedSplit(SynthDataset(o), 10, 3);
  const Dataset& train = split.train;
  const Dataset& test = split.test;
  SmallCnnOptions mo;
  mo.input_shape = {1, 8, 8};
  mo.seed = 1;
  Model init = BuildSmallCnn(3, 1, mo);
  FlConfig cfg;
  cfg.num_clients = 3;
  cfg.clients_per_round = 2;
  cfg.rounds = 100;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.3;
  cfg.eval_every = 50;
  TrainingResult a = RunTraining(init, train, test, cfg);
  TrainingResult b = RunTraining(init, train, test, cfg);
  CHECK(a.history.loss == b.history.loss);
  CHECK(a.history.accuracy == b.history.accuracy);
  CHECK(a.model.Checksum() == b.model.Checksum());
  CHECK(a.history.loss.size() == 100);
  CHECK(a.history.accuracy.size() == 2);
  CHECK(a.history.final_accuracy() >= 0.8);
  CHECK(a.history.tail_loss(10) < a.history.loss.front());

  std::ostringstream csv;
  a.history.WriteCsv(csv, false);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "round,loss,accuracy,defense_time_s");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    CHECK(line.substr(line.size() - 3) == ",NA");
  }
  CHECK(rows == 100);

  cfg.learning_rate = 1e9;
  TrainingResult blown = RunTraining(init, train, test, cfg);
  CHECK(blown.history.diverged);
  CHECK(blown.history.loss.size() < 100);
}

TEST_CASE("fl config validation") {
  FlConfig c;
  c.clients_per_round = 11;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = {};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  CHECK(ParsePartitionKind("dirichlet") == PartitionKind::kDirichlet);
  CHECK_THROWS_AS(ParsePartitionKind("shards"), ConfigError);
}

}  // TEST_SUITE
