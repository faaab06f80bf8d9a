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

#include "glab/fl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "glab/errors.hpp"
#include "glab/random.hpp"

namespace glab {
namespace {

constexpr double kDivergenceLoss = 1e6;
constexpr std::int64_t kEvalChunk = 256;

std::vector<std::int64_t> SampleWithoutReplacement(std::int64_t population,
                                                   std::int64_t count,
                                                   std::uint64_t seed) {
  std::vector<std::int64_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.Shuffle(idx);
  idx.resize(std::min(count, population));
  return idx;
}

}  // namespace

PartitionKind ParsePartitionKind(const std::string& name) {
  if (name == "iid") return PartitionKind::kIid;
  if (name == "dirichlet") return PartitionKind::kDirichlet;
  throw ConfigError("unknown partition '" + name + "'");
}

void FlConfig::Validate() const {
  if (num_clients < 1) throw ConfigError("fl: num_clients must be >= 1");
  if (clients_per_round < 1 || clients_per_round > num_clients) {
    throw ConfigError("fl: clients_per_round must be in 1..num_clients");
  }
  if (rounds < 0) throw ConfigError("fl: rounds must be >= 0");
  if (batch_size < 1) throw ConfigError("fl: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("fl: learning rate must be > 0");
  if (eval_every < 1) throw ConfigError("fl: eval_every must be >= 1");
  defense.Validate();
}

GradientVector Aggregate(const std::vector<GradientVector>& grads) {
  if (grads.empty()) throw Error("aggregate: no gradients");
  GradientVector sum = grads.front();
  for (std::size_t i = 1; i < grads.size(); ++i) {
    if (!grads[i].SameLayout(sum)) {
      throw ShapeError("aggregate: gradient " + std::to_string(i) +
                       " has a different layout");
    }
    sum += grads[i];
  }
  sum *= 1.0 / static_cast<double>(grads.size());
  return sum;
}

void Server::Apply(const std::vector<GradientVector>& uploads, double lr) {
  model_.ApplyUpdate(Aggregate(uploads), lr);
}

FlState InitState(const Model& init, const Dataset& train, const FlConfig& cfg) {
  cfg.Validate();
  const std::uint64_t seed = DeriveSeed(cfg.seed, {0xf1});
  Partition partition =
      cfg.partition == PartitionKind::kIid
          ? PartitionIid(train, cfg.num_clients, seed)
          : PartitionDirichlet(train, cfg.num_clients,
                               cfg.dirichlet_concentration, seed);
  return FlState{Server(init), std::move(partition), 0, {}};
}

RoundReport RunRound(FlState& state, const Dataset& train, const FlConfig& cfg,
                     const EvalNet* evalnet) {
  RoundReport report;
  report.round = state.round;
  const auto round = static_cast<std::uint64_t>(state.round);
  const Model& model = state.server.model();
  std::vector<std::int64_t> chosen =
      SampleWithoutReplacement(cfg.num_clients, cfg.clients_per_round,
                               DeriveSeed(cfg.seed, {0xf2, round}));
  std::sort(chosen.begin(), chosen.end());

  std::vector<GradientVector> uploads;
  double loss_sum = 0.0;
  for (std::int64_t c : chosen) {
    const auto client = static_cast<std::uint64_t>(c);
    const auto& pool = state.partition.clients[c];
    std::vector<std::int64_t> pick = SampleWithoutReplacement(
        static_cast<std::int64_t>(pool.size()), cfg.batch_size,
        DeriveSeed(cfg.seed, {0xf3, round, client}));
    for (auto& p : pick) p = pool[p];
    Batch batch = train.MakeBatch(pick);

    DefenseConfig defense = cfg.defense;
    defense.seed = DeriveSeed(cfg.defense.seed, {0xf4, round, client});
    const auto start = std::chrono::steady_clock::now();
    try {
      DefenseOutcome outcome = ApplyDefense(model, batch, defense, evalnet);
      if (cfg.upload_hook) {
        cfg.upload_hook(outcome.uploaded,
                        DeriveSeed(cfg.seed, {0xf5, round, client}));
      }
      if (!outcome.uploaded.AllFinite()) {
        throw NumericError("non-finite upload");
      }
      uploads.push_back(std::move(outcome.uploaded));
    } catch (const Error& e) {
      report.skipped.push_back("client " + std::to_string(c) + ": " + e.what());
      continue;
    }
    report.defense_time_s += std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
    report.clients.push_back(static_cast<int>(c));
    NoGrad no_grad;
    loss_sum += Loss(model, batch).item();
  }
  if (uploads.empty()) {
    throw Error("round " + std::to_string(state.round) +
                ": every client failed (" + report.skipped.front() + ")");
  }
  report.loss = loss_sum / static_cast<double>(uploads.size());
  state.server.Apply(uploads, cfg.learning_rate);
  if (cfg.keep_uploads) state.last_uploads = std::move(uploads);
  ++state.round;
  return report;
}

double TrainingHistory::final_accuracy() const {
  return accuracy.empty() ? 0.0 : accuracy.back().second;
}

double TrainingHistory::final_loss() const {
  return loss.empty() ? 0.0 : loss.back();
}

double TrainingHistory::tail_loss(std::size_t window) const {
  if (loss.empty()) return 0.0;
  const std::size_t n = std::min(window, loss.size());
  double s = 0.0;
  for (std::size_t i = loss.size() - n; i < loss.size(); ++i) s += loss[i];
  return s / static_cast<double>(n);
}

void TrainingHistory::WriteCsv(std::ostream& os, bool wall_time) const {
  os << "round,loss,accuracy,defense_time_s\n";
  std::size_t acc = 0;
  char buf[64];
  for (std::size_t r = 0; r < loss.size(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g", loss[r]);
    os << r << ',' << buf << ',';
    while (acc < accuracy.size() &&
           accuracy[acc].first < static_cast<int>(r)) {
      ++acc;
    }
    if (acc < accuracy.size() && accuracy[acc].first == static_cast<int>(r)) {
      std::snprintf(buf, sizeof(buf), "%.17g", accuracy[acc].second);
      os << buf;
    }
    os << ',';
    if (wall_time) {
      std::snprintf(buf, sizeof(buf), "%.6f", defense_time_s[r]);
      os << buf;
    } else {
      os << "NA";
    }
    os << '\n';
  }
}

double Accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("accuracy: empty dataset");
  NoGrad no_grad;
  std::int64_t correct = 0;
  const std::int64_t classes = model.num_outputs();
  for (std::int64_t start = 0; start < data.size(); start += kEvalChunk) {
    const std::int64_t end = std::min(data.size(), start + kEvalChunk);
    std::vector<std::int64_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Batch batch = data.MakeBatch(idx);
    Tensor logits = Forward(model, batch.inputs);
    auto v = logits.values();
    for (std::int64_t i = 0; i < end - start; ++i) {
      auto row = v.begin() + i * classes;
      const auto pred = std::max_element(row, row + classes) - row;
      if (pred == batch.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainingResult RunTraining(const Model& init, const Dataset& train,
                           const Dataset& test, const FlConfig& cfg,
                           const EvalNet* evalnet) {
  FlState state = InitState(init, train, cfg);
  TrainingHistory history;
  for (int r = 0; r < cfg.rounds; ++r) {
    RoundReport report = RunRound(state, train, cfg, evalnet);
    history.loss.push_back(report.loss);
    history.defense_time_s.push_back(report.defense_time_s);
    if (!std::isfinite(report.loss) || report.loss > kDivergenceLoss) {
      history.diverged = true;
      history.message = "diverged at round " + std::to_string(r) +
                        " (loss " + std::to_string(report.loss) + ", seed " +
                        std::to_string(cfg.seed) + ")";
      break;
    }
    if ((r + 1) % cfg.eval_every == 0 || r + 1 == cfg.rounds) {
      history.accuracy.emplace_back(r, Accuracy(state.server.model(), test));
    }
  }
  if (history.diverged) {
    history.accuracy.emplace_back(static_cast<int>(history.loss.size()) - 1,
                                  Accuracy(state.server.model(), test));
  }
  return TrainingResult{std::move(history), state.server.model()};
}

}  // namespace glab
