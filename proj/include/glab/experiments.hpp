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

#ifndef GLAB_EXPERIMENTS_HPP_
#define GLAB_EXPERIMENTS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "glab/attacks.hpp"
#include "glab/data.hpp"
#include "glab/defenses.hpp"
#include "glab/evalnet.hpp"
#include "glab/fl.hpp"
#include "glab/model.hpp"
#include "glab/refiner.hpp"

namespace glab {

// Flat "section.key = value" text. Blank lines and '#' comments are skipped.
class ConfigFile {
 public:
  static ConfigFile Parse(const std::string& text);
  static ConfigFile Load(const std::string& path);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void Set(const std::string& key, const std::string& value);

 private:
  std::map<std::string, std::string> values_;
};

struct SweepEntry {
  DefenseKind kind = DefenseKind::kNone;
  std::vector<double> strengths;
};

struct ExperimentConfig {
  // data
  std::string data_source = "synthetic";  // or "cifar10"
  std::string data_path;
  SynthOptions synth{10, 60, 3, 16, 16, 1};
  std::int64_t cifar_limit = 0;  // 0 keeps every record
  int test_per_class = 10;
  std::uint64_t split_seed = 2;

  // target model
  std::int64_t model_width = 1;
  Activation model_activation = Activation::kSigmoid;
  std::int64_t model_hidden = 0;

  FlConfig fl;
  double dp_clip_norm = 1.0;
  PruneStrategy prune_strategy = PruneStrategy::kGrad;
  RefinerConfig refiner;

  std::vector<SweepEntry> sweep;

  AttackConfig attack = AttackConfig::Preset("igla");
  int attack_trials = 1;  // batch-1 attacks per row

  EvalNetConfig evalnet;
  std::string evalnet_cache_dir;  // defaults to the output directory

  std::string ablation_knob = "alpha";
  std::vector<double> ablation_values{0.0, 0.1, 0.3, 0.5, 0.7, 0.9};
  double ablation_epsilon = 0.1;
  bool ablation_train = true;

  std::vector<std::int64_t> timing_widths{32, 64, 128, 256};
  std::vector<int> timing_iterations{5, 10, 20, 40};
  int timing_reps = 10;
  int timing_warmup = 3;
  int timing_batch_size = 16;
  double timing_soteria_ratio = 0.5;
  std::vector<SweepEntry> timing_defenses;

  std::vector<double> validate_rates{0.2, 0.4, 0.6, 0.8};
  double validate_noise = 0.1;

  DefenseKind demo_defense = DefenseKind::kRefiner;
  double demo_strength = 0.01;
  std::int64_t demo_index = 0;

  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int workers = 1;
  bool report_wall_time = false;

  static ExperimentConfig FromFile(const ConfigFile& file);
  void Validate() const;
};

std::vector<std::uint64_t> ParseSeedList(const std::string& text);
std::vector<double> ParseDoubleList(const std::string& text);

// One CSV row. Numeric fields left empty are written as NA.
struct ExperimentRecord {
  std::string defense;
  double strength = 0.0;
  std::string attack;
  std::uint64_t seed = 0;
  std::optional<double> pmm, psnr, ssim, evalnet, mse, time_s;
  std::string error;  // set when the cell failed
};

inline constexpr const char* kCsvHeader =
    "defense,strength,attack,seed,pmm,psnr,ssim,evalnet,mse,time_s";

std::string FormatRecord(const ExperimentRecord& record);
void WriteRecords(std::ostream& os, const std::vector<ExperimentRecord>& rows);

// Everything a cell needs that is shared across the sweep.
struct Workbench {
  ExperimentConfig cfg;
  Dataset train;
  Dataset test;
  std::optional<EvalNet> evalnet;

  static Workbench Create(const ExperimentConfig& cfg);
  Model InitialModel(std::uint64_t seed,
                     std::int64_t hidden_width = -1) const;
  FlConfig FlFor(const DefenseConfig& defense, std::uint64_t seed) const;
  DefenseConfig Defense(DefenseKind kind, double strength) const;
  // Loads a cached evaluation network or trains and caches one.
  const EvalNet& EnsureEvalNet(const std::string& cache_dir);
};

struct PrivacyReport {
  double psnr = 0.0;  // mean of capped PSNR values
  double ssim = 0.0;
  double evalnet = 0.0;
  double mse = 0.0;
  // Mean MSE between the robust data and the client data (refiner only).
  std::optional<double> robust_mse;
  std::optional<double> robust_evalnet;
};

// Attacks batch-1 uploads of the round-0 model defended with `defense`.
PrivacyReport MeasurePrivacy(const Workbench& bench,
                             const DefenseConfig& defense, std::uint64_t seed);

// Cells of the defense sweep, in (entry, strength, seed) order.
std::vector<ExperimentRecord> RunTradeoff(Workbench& bench);
// Refiner ablation over cfg.ablation_knob.
std::vector<ExperimentRecord> RunAblation(Workbench& bench);
// Per-iteration defense wall time.
std::vector<ExperimentRecord> RunTiming(Workbench& bench);

struct ValidationCell {
  std::string name;  // e.g. prune_weight_grad_product, noise_layer1
  double strength = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};
// Pruning-strategy and per-layer noise comparisons.
std::vector<ValidationCell> RunValidateWeights(Workbench& bench);

struct AttackDemo {
  Tensor original;
  std::optional<Tensor> robust;
  Tensor reconstruction;
  ExperimentRecord record;
};
AttackDemo RunAttackDemo(Workbench& bench, std::uint64_t seed);

// Binary PGM (1 channel) or PPM (3 channels) with 8-bit samples.
void WritePnm(const std::string& path, const Tensor& image);
Tensor ReadPnm(const std::string& path);

// Seed-mean line chart of y against x, one series per key.
void WriteSvgChart(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::map<std::string, std::vector<std::pair<double, double>>>& series);

// CLI entry points; each writes results under `out_dir`.
void CmdTradeoff(const ExperimentConfig& cfg, const std::string& out_dir);
void CmdAblation(const ExperimentConfig& cfg, const std::string& out_dir);
void CmdTiming(const ExperimentConfig& cfg, const std::string& out_dir);
void CmdValidateWeights(const ExperimentConfig& cfg, const std::string& out_dir);
void CmdAttackDemo(const ExperimentConfig& cfg, const std::string& out_dir);
void CmdTrainEvalNet(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace glab

#endif  // GLAB_EXPERIMENTS_HPP_
