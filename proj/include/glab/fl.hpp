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

#ifndef GLAB_FL_HPP_
#define GLAB_FL_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "glab/data.hpp"
#include "glab/defenses.hpp"
#include "glab/evalnet.hpp"
#include "glab/gradient.hpp"
#include "glab/model.hpp"

namespace glab {

enum class PartitionKind { kIid, kDirichlet };

PartitionKind ParsePartitionKind(const std::string& name);

struct FlConfig {
  int num_clients = 10;
  int clients_per_round = 10;
  int rounds = 300;
  int batch_size = 32;
  double learning_rate = 0.01;
  PartitionKind partition = PartitionKind::kIid;
  double dirichlet_concentration = 0.5;
  // Held-out accuracy every `eval_every` rounds and after the last round.
  int eval_every = 50;
  DefenseConfig defense;
  // Applied to each upload after the defense; receives a client-round seed.
  std::function<void(GradientVector&, std::uint64_t)> upload_hook;
  bool keep_uploads = false;
  std::uint64_t seed = 0;

  void Validate() const;
};

// Elementwise mean of the uploads.
GradientVector Aggregate(const std::vector<GradientVector>& grads);

// The server sees gradient vectors only.
class Server {
 public:
  explicit Server(Model model) : model_(std::move(model)) {}

  const Model& model() const { return model_; }
  // theta <- theta - lr * mean(uploads)
  void Apply(const std::vector<GradientVector>& uploads, double lr);

 private:
  Model model_;
};

struct FlState {
  Server server;
  Partition partition;
  int round = 0;
  std::vector<GradientVector> last_uploads;  // when keep_uploads is set
};

struct RoundReport {
  int round = 0;
  double loss = 0.0;  // mean client loss on the sampled batches
  double defense_time_s = 0.0;
  std::vector<int> clients;
  std::vector<std::string> skipped;  // "client <id>: <reason>"
};

FlState InitState(const Model& init, const Dataset& train, const FlConfig& cfg);

RoundReport RunRound(FlState& state, const Dataset& train, const FlConfig& cfg,
                     const EvalNet* evalnet = nullptr);

struct TrainingHistory {
  std::vector<double> loss;            // one per round
  std::vector<double> defense_time_s;  // one per round
  std::vector<std::pair<int, double>> accuracy;  // (round, accuracy)
  bool diverged = false;
  std::string message;

  double final_accuracy() const;
  double final_loss() const;
  // Mean loss over the last `window` rounds.
  double tail_loss(std::size_t window) const;
  // round,loss,accuracy,defense_time_s. Times are written as NA unless
  // `wall_time` is set so that the file is reproducible.
  void WriteCsv(std::ostream& os, bool wall_time) const;
};

double Accuracy(const Model& model, const Dataset& data);

struct TrainingResult {
  TrainingHistory history;
  Model model;
};

// Runs cfg.rounds rounds and evaluates on `test`. Stops early if the loss
// exceeds 1e6 or turns non-finite.
TrainingResult RunTraining(const Model& init, const Dataset& train,
                           const Dataset& test, const FlConfig& cfg,
                           const EvalNet* evalnet = nullptr);

}  // namespace glab

#endif  // GLAB_FL_HPP_
