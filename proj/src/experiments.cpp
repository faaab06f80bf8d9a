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

#include "glab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "glab/checkpoint.hpp"
#include "glab/errors.hpp"
#include "glab/metrics.hpp"
#include "glab/random.hpp"

namespace glab {
namespace {

namespace fs = std::filesystem;

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (item.empty()) throw ConfigError("empty item in list '" + text + "'");
    out.push_back(item);
  }
  return out;
}

double ToDouble(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

long long ToInt(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::uint64_t Fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Runs jobs 0..n-1 on up to `workers` threads; job i writes only slot i.
void RunJobs(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::mutex error_mutex;
  std::exception_ptr error;
  const std::size_t count = std::min<std::size_t>(workers, n);
  for (std::size_t t = 0; t < count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<SweepEntry> ParseSweep(const std::map<std::string, std::string>& values,
                                   const std::string& section) {
  std::vector<SweepEntry> out;
  auto it = values.find(section + ".defenses");
  if (it == values.end()) return out;
  for (const auto& name : SplitList(it->second)) {
    SweepEntry e;
    e.kind = ParseDefenseKind(name);
    auto s = values.find(section + "." + name);
    if (s != values.end()) {
      e.strengths = ParseDoubleList(s->second);
    } else if (e.kind == DefenseKind::kNone) {
      e.strengths = {0.0};
    } else {
      throw ConfigError(section + "." + name + " lists no strengths");
    }
    out.push_back(std::move(e));
  }
  return out;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
}

void WriteCsvFile(const std::string& path, const std::vector<ExperimentRecord>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  WriteRecords(os, rows);
}

double PerClientDefenseTime(const TrainingHistory& h, int clients) {
  double total = 0.0;
  for (double t : h.defense_time_s) total += t;
  const double n = static_cast<double>(h.defense_time_s.size()) * clients;
  return n > 0 ? total / n : 0.0;
}

}  // namespace

// ---------------------------------------------------------------- config

ConfigFile ConfigFile::Parse(const std::string& text) {
  ConfigFile file;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) +
                        ": expected 'section.key = value'");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    if (key.find('.') == std::string::npos || key.front() == '.' ||
        key.back() == '.') {
      throw ConfigError("config line " + std::to_string(number) + ": key '" +
                        key + "' is not of the form section.key");
    }
    if (file.values_.count(key)) {
      throw ConfigError("config line " + std::to_string(number) +
                        ": duplicate key '" + key + "'");
    }
    file.values_[key] = value;
  }
  return file;
}

ConfigFile ConfigFile::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return Parse(ss.str());
}

void ConfigFile::Set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::vector<std::uint64_t> ParseSeedList(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : SplitList(text)) {
    const long long v = ToInt("seeds", item);
    if (v < 0) throw ConfigError("seeds must be nonnegative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : SplitList(text)) out.push_back(ToDouble("list", item));
  return out;
}

ExperimentConfig ExperimentConfig::FromFile(const ConfigFile& file) {
  ExperimentConfig c;
  c.fl.num_clients = 10;
  c.fl.clients_per_round = 5;
  c.fl.rounds = 200;
  c.fl.batch_size = 16;
  c.fl.learning_rate = 1.0;
  c.evalnet.epochs = 30;
  c.evalnet.learning_rate = 2e-3;
  c.timing_defenses = {{DefenseKind::kDpGaussian, {1e-2}},
                       {DefenseKind::kGq, {8}},
                       {DefenseKind::kPrune, {0.5}},
                       {DefenseKind::kSoteria, {0.5}},
                       {DefenseKind::kRefiner, {0.01}}};

  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto dbl = [](double& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = ToDouble(k, v); };
  };
  auto i64 = [](auto& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) {
      field = static_cast<std::decay_t<decltype(field)>>(ToInt(k, v));
    };
  };
  auto boolean = [](bool& field) -> Setter {
    return [&field](const std::string& k, const std::string& v) { field = ToBool(k, v); };
  };
  auto str = [](std::string& field) -> Setter {
    return [&field](const std::string&, const std::string& v) { field = v; };
  };
  std::map<std::string, Setter> setters{
      {"data.source", str(c.data_source)},
      {"data.path", str(c.data_path)},
      {"data.classes", i64(c.synth.num_classes)},
      {"data.per_class", i64(c.synth.n_per_class)},
      {"data.channels", i64(c.synth.channels)},
      {"data.height", i64(c.synth.height)},
      {"data.width", i64(c.synth.width)},
      {"data.seed", i64(c.synth.seed)},
      {"data.limit", i64(c.cifar_limit)},
      {"data.test_per_class", i64(c.test_per_class)},
      {"data.split_seed", i64(c.split_seed)},
      {"model.width", i64(c.model_width)},
      {"model.activation",
       [&c](const std::string&, const std::string& v) { c.model_activation = ParseActivation(v); }},
      {"model.hidden", i64(c.model_hidden)},
      {"fl.clients", i64(c.fl.num_clients)},
      {"fl.clients_per_round", i64(c.fl.clients_per_round)},
      {"fl.rounds", i64(c.fl.rounds)},
      {"fl.batch_size", i64(c.fl.batch_size)},
      {"fl.lr", dbl(c.fl.learning_rate)},
      {"fl.partition",
       [&c](const std::string&, const std::string& v) { c.fl.partition = ParsePartitionKind(v); }},
      {"fl.dirichlet", dbl(c.fl.dirichlet_concentration)},
      {"fl.eval_every", i64(c.fl.eval_every)},
      {"dp.clip_norm", dbl(c.dp_clip_norm)},
      {"prune.strategy",
       [&c](const std::string&, const std::string& v) { c.prune_strategy = ParsePruneStrategy(v); }},
      {"refiner.alpha", dbl(c.refiner.alpha)},
      {"refiner.beta", dbl(c.refiner.beta)},
      {"refiner.tau", dbl(c.refiner.tau)},
      {"refiner.iterations", i64(c.refiner.iterations)},
      {"refiner.epsilon", dbl(c.refiner.epsilon)},
      {"refiner.step_size", dbl(c.refiner.step_size)},
      {"attack.preset",
       [&c](const std::string&, const std::string& v) { c.attack = AttackConfig::Preset(v); }},
      {"attack.loss", nullptr},
      {"attack.optimizer", nullptr},
      {"attack.lr", nullptr},
      {"attack.iterations", nullptr},
      {"attack.restarts", nullptr},
      {"attack.tv_weight", nullptr},
      {"attack.l2_weight", nullptr},
      {"attack.infer_labels", nullptr},
      {"attack.trials", i64(c.attack_trials)},
      {"evalnet.epochs", i64(c.evalnet.epochs)},
      {"evalnet.lr", dbl(c.evalnet.learning_rate)},
      {"evalnet.batch_size", i64(c.evalnet.batch_size)},
      {"evalnet.channels",
       [&c](const std::string& k, const std::string& v) {
         c.evalnet.channels.clear();
         for (const auto& item : SplitList(v)) c.evalnet.channels.push_back(ToInt(k, item));
       }},
      {"evalnet.continuous", boolean(c.evalnet.continuous_ratio)},
      {"evalnet.seed", i64(c.evalnet.seed)},
      {"evalnet.cache_dir", str(c.evalnet_cache_dir)},
      {"ablation.knob", str(c.ablation_knob)},
      {"ablation.values",
       [&c](const std::string&, const std::string& v) { c.ablation_values = ParseDoubleList(v); }},
      {"ablation.epsilon", dbl(c.ablation_epsilon)},
      {"ablation.train", boolean(c.ablation_train)},
      {"timing.widths",
       [&c](const std::string& k, const std::string& v) {
         c.timing_widths.clear();
         for (const auto& item : SplitList(v)) c.timing_widths.push_back(ToInt(k, item));
       }},
      {"timing.iterations",
       [&c](const std::string& k, const std::string& v) {
         c.timing_iterations.clear();
         for (const auto& item : SplitList(v)) {
           c.timing_iterations.push_back(static_cast<int>(ToInt(k, item)));
         }
       }},
      {"timing.reps", i64(c.timing_reps)},
      {"timing.warmup", i64(c.timing_warmup)},
      {"timing.batch_size", i64(c.timing_batch_size)},
      {"timing.soteria_ratio", dbl(c.timing_soteria_ratio)},
      {"validate.rates",
       [&c](const std::string&, const std::string& v) { c.validate_rates = ParseDoubleList(v); }},
      {"validate.noise", dbl(c.validate_noise)},
      {"demo.defense",
       [&c](const std::string&, const std::string& v) { c.demo_defense = ParseDefenseKind(v); }},
      {"demo.strength", dbl(c.demo_strength)},
      {"demo.index", i64(c.demo_index)},
      {"run.seeds",
       [&c](const std::string&, const std::string& v) { c.seeds = ParseSeedList(v); }},
      {"run.workers", i64(c.workers)},
      {"report.wall_time", boolean(c.report_wall_time)},
  };

  const auto& values = file.values();
  // The preset must be applied before individual attack overrides.
  if (auto it = values.find("attack.preset"); it != values.end()) {
    setters.at("attack.preset")(it->first, it->second);
  }
  for (const auto& [key, value] : values) {
    const std::string section = key.substr(0, key.find('.'));
    if (section == "sweep" || (section == "timing" && !setters.count(key))) {
      continue;  // parsed below
    }
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    if (key == "attack.preset") continue;
    if (!it->second) {
      const std::string field = key.substr(key.find('.') + 1);
      if (field == "loss") c.attack.loss = ParseMatchLoss(value);
      if (field == "optimizer") c.attack.optimizer = ParseOptimizerKind(value);
      if (field == "lr") c.attack.learning_rate = ToDouble(key, value);
      if (field == "iterations") c.attack.iterations = static_cast<int>(ToInt(key, value));
      if (field == "restarts") c.attack.restarts = static_cast<int>(ToInt(key, value));
      if (field == "tv_weight") c.attack.tv_weight = ToDouble(key, value);
      if (field == "l2_weight") c.attack.l2_weight = ToDouble(key, value);
      if (field == "infer_labels") c.attack.infer_labels = ToBool(key, value);
      continue;
    }
    it->second(key, value);
  }
  c.sweep = ParseSweep(values, "sweep");
  for (const auto& [key, value] : values) {
    // Strength lists for unlisted defenses are allowed; only the name is checked.
    if (key.rfind("sweep.", 0) == 0 && key != "sweep.defenses") {
      ParseDefenseKind(key.substr(6));
    }
    if (key.rfind("timing.", 0) == 0 && !setters.count(key) && key != "timing.defenses") {
      ParseDefenseKind(key.substr(7));
    }
  }
  if (values.count("timing.defenses")) c.timing_defenses = ParseSweep(values, "timing");
  c.Validate();
  return c;
}

void ExperimentConfig::Validate() const {
  if (data_source != "synthetic" && data_source != "cifar10") {
    throw ConfigError("data.source must be synthetic or cifar10");
  }
  if (data_source == "cifar10" && data_path.empty()) {
    throw ConfigError("data.path is required for cifar10");
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (attack_trials < 1) throw ConfigError("attack.trials must be >= 1");
  if (workers < 1) throw ConfigError("run.workers must be >= 1");
  if (timing_reps < 1 || timing_warmup < 0) {
    throw ConfigError("timing.reps must be >= 1 and timing.warmup >= 0");
  }
  for (const auto& e : sweep) {
    if (e.strengths.empty()) throw ConfigError("sweep entry without strengths");
    for (double s : e.strengths) {
      DefenseConfig d;
      d.kind = e.kind;
      d.strength = s;
      d.refiner = refiner;
      d.clip_norm = dp_clip_norm;
      d.Validate();
    }
  }
  FlConfig f = fl;
  f.Validate();
  refiner.Validate();
  attack.Validate();
  const std::vector<std::string> knobs{"alpha", "beta", "iota", "tau"};
  if (std::find(knobs.begin(), knobs.end(), ablation_knob) == knobs.end()) {
    throw ConfigError("ablation.knob must be one of alpha, beta, iota, tau");
  }
  if (ablation_values.empty()) throw ConfigError("ablation.values is empty");
}

// ---------------------------------------------------------------- records

std::string FormatRecord(const ExperimentRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? FormatNumber(*v) : std::string("NA");
  };
  std::string line = r.defense + "," + FormatNumber(r.strength) + "," + r.attack +
                     "," + std::to_string(r.seed) + "," + opt(r.pmm) + "," +
                     opt(r.psnr) + "," + opt(r.ssim) + "," + opt(r.evalnet) +
                     "," + opt(r.mse) + "," + opt(r.time_s);
  return line;
}

void WriteRecords(std::ostream& os, const std::vector<ExperimentRecord>& rows) {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) os << FormatRecord(r) << '\n';
}

// ---------------------------------------------------------------- workbench

Workbench Workbench::Create(const ExperimentConfig& cfg) {
  cfg.Validate();
  Workbench bench;
  bench.cfg = cfg;
  Dataset all;
  if (cfg.data_source == "synthetic") {
    all = SynthDataset(cfg.synth);
  } else {
    all = LoadCifar10Binary(cfg.data_path);
    if (cfg.cifar_limit > 0 && cfg.cifar_limit < all.size()) {
      std::vector<std::int64_t> idx(cfg.cifar_limit);
      for (std::int64_t i = 0; i < cfg.cifar_limit; ++i) idx[i] = i;
      all = all.Subset(idx);
    }
  }
  Split split = StratifiedSplit(all, cfg.test_per_class, cfg.split_seed);
  bench.train = std::move(split.train);
  bench.test = std::move(split.test);
  return bench;
}

Model Workbench::InitialModel(std::uint64_t seed, std::int64_t hidden_width) const {
  SmallCnnOptions o;
  o.input_shape = train.image_shape;
  o.activation = cfg.model_activation;
  o.seed = DeriveSeed(seed, {0x30});
  o.hidden_width = hidden_width < 0 ? cfg.model_hidden : hidden_width;
  return BuildSmallCnn(train.num_classes, cfg.model_width, o);
}

FlConfig Workbench::FlFor(const DefenseConfig& defense, std::uint64_t seed) const {
  FlConfig f = cfg.fl;
  f.defense = defense;
  f.defense.seed = DeriveSeed(seed, {0x32});
  f.seed = DeriveSeed(seed, {0x31});
  return f;
}

DefenseConfig Workbench::Defense(DefenseKind kind, double strength) const {
  DefenseConfig d;
  d.kind = kind;
  d.strength = strength;
  d.clip_norm = cfg.dp_clip_norm;
  d.prune_strategy = cfg.prune_strategy;
  d.refiner = cfg.refiner;
  return d;
}

const EvalNet& Workbench::EnsureEvalNet(const std::string& cache_dir) {
  if (evalnet) return *evalnet;
  std::ostringstream key;
  key << cfg.data_source << '|' << cfg.data_path << '|' << cfg.synth.num_classes
      << '|' << cfg.synth.n_per_class << '|' << cfg.synth.channels << '|'
      << cfg.synth.height << '|' << cfg.synth.width << '|' << cfg.synth.seed
      << '|' << cfg.cifar_limit << '|' << cfg.test_per_class << '|'
      << cfg.split_seed << '|' << cfg.evalnet.epochs << '|'
      << FormatNumber(cfg.evalnet.learning_rate) << '|' << cfg.evalnet.batch_size
      << '|' << cfg.evalnet.continuous_ratio << '|' << cfg.evalnet.seed;
  for (auto ch : cfg.evalnet.channels) key << '|' << ch;
  char name[64];
  std::snprintf(name, sizeof(name), "evalnet-%016llx.ckpt",
                static_cast<unsigned long long>(Fnv1a(key.str())));
  const std::string dir = cfg.evalnet_cache_dir.empty() ? cache_dir : cfg.evalnet_cache_dir;
  const std::string path = (fs::path(dir) / name).string();
  if (fs::exists(path)) {
    evalnet = EvalNet::Load(path);
  } else {
    evalnet = TrainEvalNet(train, cfg.evalnet);
    EnsureDir(dir);
    evalnet->Save(path);
  }
  return *evalnet;
}

// ---------------------------------------------------------------- cells

PrivacyReport MeasurePrivacy(const Workbench& bench, const DefenseConfig& defense,
                             std::uint64_t seed) {
  const ExperimentConfig& cfg = bench.cfg;
  const EvalNet* net = bench.evalnet ? &*bench.evalnet : nullptr;
  const Model model = bench.InitialModel(seed);
  PrivacyReport report;
  double robust_mse = 0.0, robust_score = 0.0;
  for (int t = 0; t < cfg.attack_trials; ++t) {
    const auto trial = static_cast<std::uint64_t>(t);
    Rng rng(DeriveSeed(seed, {0x40, trial}));
    const std::int64_t index =
        static_cast<std::int64_t>(rng.UniformInt(bench.train.size()));
    const std::vector<std::int64_t> pick{index};
    Batch batch = bench.train.MakeBatch(pick);
    DefenseConfig d = defense;
    d.seed = DeriveSeed(seed, {0x41, trial});
    DefenseOutcome outcome = ApplyDefense(model, batch, d, net);
    AttackConfig attack = cfg.attack;
    attack.seed = DeriveSeed(seed, {0x42, trial});
    ReconstructionResult rec = GradientMatchAttack(model, outcome.uploaded, attack, 1);
    report.psnr += CappedPsnr(Psnr(rec.x_hat, batch.inputs));
    report.ssim += Ssim(rec.x_hat, batch.inputs).value;
    report.mse += Mse(rec.x_hat.values(), batch.inputs.values());
    if (net) report.evalnet += PmScore(*net, rec.x_hat);
    if (outcome.refine) {
      robust_mse += Mse(outcome.refine->x_star.values(), batch.inputs.values());
      if (net) robust_score += PmScore(*net, outcome.refine->x_star);
    }
  }
  const double n = cfg.attack_trials;
  report.psnr /= n;
  report.ssim /= n;
  report.mse /= n;
  report.evalnet /= n;
  if (defense.kind == DefenseKind::kRefiner) {
    report.robust_mse = robust_mse / n;
    report.robust_evalnet = robust_score / n;
  }
  return report;
}

namespace {

struct Cell {
  std::string label;
  DefenseConfig defense;
  double strength = 0.0;
  std::uint64_t seed = 0;
  bool train = true;
  bool privacy = true;
};

// Undefended final accuracy per seed.
std::map<std::uint64_t, double> Baselines(const Workbench& bench,
                                          const std::vector<std::uint64_t>& seeds) {
  std::vector<double> acc(seeds.size());
  RunJobs(seeds.size(), bench.cfg.workers, [&](std::size_t i) {
    const DefenseConfig none = bench.Defense(DefenseKind::kNone, 0.0);
    TrainingResult r = RunTraining(bench.InitialModel(seeds[i]), bench.train,
                                   bench.test, bench.FlFor(none, seeds[i]));
    acc[i] = r.history.final_accuracy();
  });
  std::map<std::uint64_t, double> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out[seeds[i]] = acc[i];
  return out;
}

std::vector<ExperimentRecord> RunCells(const Workbench& bench,
                                       const std::vector<Cell>& cells) {
  const ExperimentConfig& cfg = bench.cfg;
  const bool needs_baseline = std::any_of(cells.begin(), cells.end(), [](const Cell& c) {
    return c.train && c.defense.kind != DefenseKind::kNone;
  });
  std::map<std::uint64_t, double> baseline;
  if (needs_baseline) baseline = Baselines(bench, cfg.seeds);
  const EvalNet* net = bench.evalnet ? &*bench.evalnet : nullptr;

  std::vector<ExperimentRecord> rows(cells.size());
  RunJobs(cells.size(), cfg.workers, [&](std::size_t i) {
    const Cell& cell = cells[i];
    ExperimentRecord& row = rows[i];
    row.defense = cell.label;
    row.strength = cell.strength;
    row.attack = cfg.attack.name;
    row.seed = cell.seed;
    try {
      if (cell.train) {
        if (cell.defense.kind == DefenseKind::kNone) {
          row.pmm = 100.0;
          if (cfg.report_wall_time) {
            TrainingResult r = RunTraining(bench.InitialModel(cell.seed), bench.train,
                                           bench.test, bench.FlFor(cell.defense, cell.seed));
            row.time_s = PerClientDefenseTime(r.history, cfg.fl.clients_per_round);
          }
        } else {
          TrainingResult r = RunTraining(bench.InitialModel(cell.seed), bench.train,
                                         bench.test, bench.FlFor(cell.defense, cell.seed),
                                         net);
          row.pmm = Pmm(r.history.final_accuracy(), baseline.at(cell.seed));
          if (cfg.report_wall_time) {
            row.time_s = PerClientDefenseTime(r.history, cfg.fl.clients_per_round);
          }
        }
      }
      if (cell.privacy) {
        PrivacyReport p = MeasurePrivacy(bench, cell.defense, cell.seed);
        row.psnr = p.psnr;
        row.ssim = p.ssim;
        row.mse = p.mse;
        if (net) row.evalnet = p.evalnet;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      row.pmm.reset();
      row.psnr.reset();
      row.ssim.reset();
      row.mse.reset();
      row.evalnet.reset();
      row.time_s.reset();
    }
  });
  return rows;
}

void ReportErrors(const std::vector<ExperimentRecord>& rows, const std::string& out_dir) {
  std::ofstream log;
  for (const auto& r : rows) {
    if (r.error.empty()) continue;
    if (!log.is_open()) log.open((fs::path(out_dir) / "errors.log").string());
    const std::string msg = r.defense + " strength " + FormatNumber(r.strength) +
                            " seed " + std::to_string(r.seed) + ": " + r.error;
    log << msg << '\n';
    std::cerr << "cell failed: " << msg << '\n';
  }
}

std::map<std::string, std::vector<std::pair<double, double>>> SeedMeans(
    const std::vector<ExperimentRecord>& rows,
    const std::function<std::optional<std::pair<double, double>>(const ExperimentRecord&)>& point,
    bool by_strength) {
  // (series, strength) -> sums
  std::map<std::pair<std::string, double>, std::tuple<double, double, int>> acc;
  for (const auto& r : rows) {
    auto p = point(r);
    if (!p) continue;
    auto& [sx, sy, n] = acc[{r.defense, r.strength}];
    sx += p->first;
    sy += p->second;
    ++n;
  }
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& [key, v] : acc) {
    const auto& [sx, sy, n] = v;
    series[key.first].emplace_back(by_strength ? key.second : sx / n, sy / n);
  }
  for (auto& [name, pts] : series) std::sort(pts.begin(), pts.end());
  return series;
}

}  // namespace

std::vector<ExperimentRecord> RunTradeoff(Workbench& bench) {
  std::vector<Cell> cells;
  for (const auto& entry : bench.cfg.sweep) {
    for (double s : entry.strengths) {
      for (auto seed : bench.cfg.seeds) {
        cells.push_back({DefenseKindName(entry.kind), bench.Defense(entry.kind, s), s,
                         seed, true, true});
      }
    }
  }
  if (cells.empty()) throw ConfigError("tradeoff: sweep.defenses is empty");
  return RunCells(bench, cells);
}

std::vector<ExperimentRecord> RunAblation(Workbench& bench) {
  const ExperimentConfig& cfg = bench.cfg;
  std::vector<Cell> cells;
  for (double v : cfg.ablation_values) {
    for (auto seed : cfg.seeds) {
      DefenseConfig d = bench.Defense(DefenseKind::kRefiner, cfg.ablation_epsilon);
      if (cfg.ablation_knob == "alpha") d.refiner.alpha = v;
      if (cfg.ablation_knob == "beta") d.refiner.beta = v;
      if (cfg.ablation_knob == "tau") d.refiner.tau = v;
      if (cfg.ablation_knob == "iota") d.refiner.iterations = static_cast<int>(v);
      cells.push_back({"refiner_" + cfg.ablation_knob, d, v, seed, cfg.ablation_train, true});
    }
  }
  return RunCells(bench, cells);
}

std::vector<ExperimentRecord> RunTiming(Workbench& bench) {
  const ExperimentConfig& cfg = bench.cfg;
  const EvalNet* net = bench.evalnet ? &*bench.evalnet : nullptr;
  std::vector<std::int64_t> pick(std::min<std::int64_t>(cfg.timing_batch_size,
                                                        bench.train.size()));
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = static_cast<std::int64_t>(i);
  const Batch batch = bench.train.MakeBatch(pick);
  std::vector<ExperimentRecord> rows;
  auto measure = [&](const Model& model, const DefenseConfig& d) {
    std::vector<double> times;
    for (int r = 0; r < cfg.timing_warmup + cfg.timing_reps; ++r) {
      const auto start = std::chrono::steady_clock::now();
      ApplyDefense(model, batch, d, net);
      const double t = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start).count();
      if (r >= cfg.timing_warmup) times.push_back(t);
    }
    return Median(times);
  };
  for (auto seed : cfg.seeds) {
    const Model base = bench.InitialModel(seed);
    auto add = [&](const std::string& name, double strength, double t) {
      ExperimentRecord row;
      row.defense = name;
      row.strength = strength;
      row.attack = "none";
      row.seed = seed;
      row.time_s = t;
      rows.push_back(row);
    };
    add("none", 0.0, measure(base, bench.Defense(DefenseKind::kNone, 0.0)));
    for (const auto& entry : cfg.timing_defenses) {
      if (entry.kind == DefenseKind::kSoteria) {
        for (auto width : cfg.timing_widths) {
          const Model m = bench.InitialModel(seed, width);
          DefenseConfig d = bench.Defense(DefenseKind::kSoteria, cfg.timing_soteria_ratio);
          add("soteria_width", static_cast<double>(width), measure(m, d));
        }
      } else if (entry.kind == DefenseKind::kRefiner) {
        for (int iota : cfg.timing_iterations) {
          DefenseConfig d = bench.Defense(DefenseKind::kRefiner, entry.strengths.front());
          d.refiner.iterations = iota;
          add("refiner_iota", iota, measure(base, d));
        }
      } else {
        for (double s : entry.strengths) {
          add(DefenseKindName(entry.kind), s, measure(base, bench.Defense(entry.kind, s)));
        }
      }
    }
  }
  return rows;
}

std::vector<ValidationCell> RunValidateWeights(Workbench& bench) {
  const ExperimentConfig& cfg = bench.cfg;
  struct Job {
    std::string name;
    double strength;
    std::uint64_t seed;
    std::function<void(FlConfig&)> setup;
  };
  std::vector<Job> jobs;
  for (auto seed : cfg.seeds) {
    jobs.push_back({"none", 0.0, seed, [](FlConfig&) {}});
  }
  for (PruneStrategy s : {PruneStrategy::kWeightGradProduct, PruneStrategy::kGrad,
                          PruneStrategy::kWeight}) {
    for (double rate : cfg.validate_rates) {
      for (auto seed : cfg.seeds) {
        jobs.push_back({"prune_" + PruneStrategyName(s), rate, seed,
                        [&bench, s, rate](FlConfig& f) {
                          f.defense = bench.Defense(DefenseKind::kPrune, rate);
                          f.defense.prune_strategy = s;
                        }});
      }
    }
  }
  const std::size_t layers = bench.InitialModel(0).num_layers();
  struct NoiseCase {
    std::string name;
    std::size_t layer;
    double magnitude;
  };
  const std::vector<NoiseCase> noise{{"noise_layer1", 0, cfg.validate_noise},
                                     {"noise_last_layer", layers - 1, cfg.validate_noise},
                                     {"noise_zero", 0, 0.0}};
  for (const auto& nc : noise) {
    for (auto seed : cfg.seeds) {
      jobs.push_back({nc.name, nc.magnitude, seed, [nc](FlConfig& f) {
                        f.upload_hook = [nc](GradientVector& g, std::uint64_t s) {
                          if (nc.magnitude == 0.0) return;
                          Rng rng(s);
                          for (double& v : g.layers[nc.layer]) {
                            v += rng.Uniform(-nc.magnitude, nc.magnitude);
                          }
                        };
                      }});
    }
  }
  std::vector<ValidationCell> out(jobs.size());
  RunJobs(jobs.size(), cfg.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    FlConfig f = bench.FlFor(bench.Defense(DefenseKind::kNone, 0.0), job.seed);
    job.setup(f);
    f.defense.seed = DeriveSeed(job.seed, {0x32});
    TrainingResult r = RunTraining(bench.InitialModel(job.seed), bench.train, bench.test, f);
    out[i] = {job.name, job.strength, job.seed, r.history.final_accuracy()};
  });
  return out;
}

AttackDemo RunAttackDemo(Workbench& bench, std::uint64_t seed) {
  const ExperimentConfig& cfg = bench.cfg;
  const EvalNet* net = bench.evalnet ? &*bench.evalnet : nullptr;
  if (cfg.demo_index < 0 || cfg.demo_index >= bench.train.size()) {
    throw ConfigError("demo.index out of range");
  }
  const Model model = bench.InitialModel(seed);
  const std::vector<std::int64_t> pick{cfg.demo_index};
  Batch batch = bench.train.MakeBatch(pick);
  DefenseConfig d = bench.Defense(cfg.demo_defense, cfg.demo_strength);
  d.seed = DeriveSeed(seed, {0x41});
  DefenseOutcome outcome = ApplyDefense(model, batch, d, net);
  AttackConfig attack = cfg.attack;
  attack.seed = DeriveSeed(seed, {0x42});
  ReconstructionResult rec = GradientMatchAttack(model, outcome.uploaded, attack, 1);

  AttackDemo demo;
  demo.original = batch.inputs;
  demo.reconstruction = rec.x_hat;
  if (outcome.refine) demo.robust = outcome.refine->x_star;
  ExperimentRecord& row = demo.record;
  row.defense = DefenseKindName(cfg.demo_defense);
  row.strength = cfg.demo_strength;
  row.attack = attack.name;
  row.seed = seed;
  row.psnr = Psnr(rec.x_hat, batch.inputs);
  row.ssim = Ssim(rec.x_hat, batch.inputs).value;
  row.mse = Mse(rec.x_hat.values(), batch.inputs.values());
  if (net) row.evalnet = PmScore(*net, rec.x_hat);
  return demo;
}

// ---------------------------------------------------------------- images

void WritePnm(const std::string& path, const Tensor& image) {
  Shape s = image.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3 || (s[0] != 1 && s[0] != 3)) {
    throw ShapeError("pnm: expected (1|3,h,w), got " + ShapeToString(image.shape()));
  }
  const std::int64_t c = s[0], h = s[1], w = s[2];
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  auto v = image.values();
  std::vector<unsigned char> bytes(c * h * w);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const double px = std::clamp(v[(ch * h + y) * w + x], 0.0, 1.0);
        bytes[(y * w + x) * c + ch] = static_cast<unsigned char>(std::lround(px * 255.0));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

Tensor ReadPnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  std::string magic;
  std::int64_t w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if ((magic != "P5" && magic != "P6") || w < 1 || h < 1 || maxval != 255) {
    throw FormatError("pnm: unsupported header in " + path);
  }
  is.get();
  const std::int64_t c = magic == "P5" ? 1 : 3;
  std::vector<unsigned char> bytes(c * h * w);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError("pnm: truncated pixel data in " + path);
  }
  std::vector<double> v(c * h * w);
  for (std::int64_t y = 0; y < h; ++y) {
    for (std::int64_t x = 0; x < w; ++x) {
      for (std::int64_t ch = 0; ch < c; ++ch) {
        v[(ch * h + y) * w + x] = bytes[(y * w + x) * c + ch] / 255.0;
      }
    }
  }
  return Tensor::Constant({c, h, w}, std::move(v));
}

// ---------------------------------------------------------------- charts

void WriteSvgChart(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::map<std::string, std::vector<std::pair<double, double>>>& series) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 170, kTop = 40, kBottom = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& [name, pts] : series) {
    for (auto [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight
     << "\" y2=\"" << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"15\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 15 " << kH / 2
     << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  os << "<text x=\"" << kLeft << "\" y=\"" << kH - kBottom + 15 << "\">" << FormatNumber(x0)
     << "</text>\n<text x=\"" << kW - kRight << "\" y=\"" << kH - kBottom + 15
     << "\" text-anchor=\"end\">" << FormatNumber(x1) << "</text>\n";
  os << "<text x=\"" << kLeft - 5 << "\" y=\"" << kH - kBottom << "\" text-anchor=\"end\">"
     << FormatNumber(y0) << "</text>\n<text x=\"" << kLeft - 5 << "\" y=\"" << kTop + 5
     << "\" text-anchor=\"end\">" << FormatNumber(y1) << "</text>\n";
  std::size_t k = 0;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[k % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (auto [x, y] : pts) {
      if (std::isfinite(x) && std::isfinite(y)) os << px(x) << ',' << py(y) << ' ';
    }
    os << "\"/>\n";
    for (auto [x, y] : pts) {
      if (std::isfinite(x) && std::isfinite(y)) {
        os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
           << "\"/>\n";
      }
    }
    os << "<text x=\"" << kW - kRight + 10 << "\" y=\"" << kTop + 18 * k << "\" fill=\""
       << color << "\">" << name << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
}

// ---------------------------------------------------------------- commands

void CmdTradeoff(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet(out_dir);
  std::vector<ExperimentRecord> rows = RunTradeoff(bench);
  WriteCsvFile((fs::path(out_dir) / "tradeoff.csv").string(), rows);
  ReportErrors(rows, out_dir);
  WriteSvgChart((fs::path(out_dir) / "tradeoff.svg").string(), "PMM vs PSNR (seed mean)",
                "PMM", "PSNR (dB)",
                SeedMeans(rows, [](const ExperimentRecord& r) -> std::optional<std::pair<double, double>> {
                  if (!r.pmm || !r.psnr) return std::nullopt;
                  return std::pair{*r.pmm, *r.psnr};
                }, false));
}

void CmdAblation(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet(out_dir);
  std::vector<ExperimentRecord> rows = RunAblation(bench);
  WriteCsvFile((fs::path(out_dir) / "ablation.csv").string(), rows);
  ReportErrors(rows, out_dir);
  WriteSvgChart((fs::path(out_dir) / "ablation.svg").string(),
                "PSNR over " + cfg.ablation_knob + " (seed mean)", cfg.ablation_knob,
                "PSNR (dB)",
                SeedMeans(rows, [](const ExperimentRecord& r) -> std::optional<std::pair<double, double>> {
                  if (!r.psnr) return std::nullopt;
                  return std::pair{r.strength, *r.psnr};
                }, true));
}

void CmdTiming(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet(out_dir);
  std::vector<ExperimentRecord> rows = RunTiming(bench);
  WriteCsvFile((fs::path(out_dir) / "timing.csv").string(), rows);
}

void CmdValidateWeights(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  std::vector<ValidationCell> cells = RunValidateWeights(bench);
  std::map<std::uint64_t, double> baseline;
  for (const auto& c : cells) {
    if (c.name == "none") baseline[c.seed] = c.accuracy;
  }
  std::vector<ExperimentRecord> rows;
  std::ofstream acc((fs::path(out_dir) / "validate_accuracy.csv").string(), std::ios::binary);
  acc << "cell,strength,seed,accuracy\n";
  for (const auto& c : cells) {
    ExperimentRecord r;
    r.defense = c.name;
    r.strength = c.strength;
    r.attack = "none";
    r.seed = c.seed;
    r.pmm = Pmm(c.accuracy, baseline.at(c.seed));
    rows.push_back(r);
    acc << c.name << ',' << FormatNumber(c.strength) << ',' << c.seed << ','
        << FormatNumber(c.accuracy) << '\n';
  }
  WriteCsvFile((fs::path(out_dir) / "validate_weights.csv").string(), rows);
}

void CmdAttackDemo(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  bench.EnsureEvalNet(out_dir);
  std::vector<ExperimentRecord> rows;
  const bool color = bench.train.image_shape[0] == 3;
  const std::string ext = color ? ".ppm" : ".pgm";
  for (auto seed : cfg.seeds) {
    AttackDemo demo = RunAttackDemo(bench, seed);
    const std::string stem = (fs::path(out_dir) / ("seed" + std::to_string(seed))).string();
    if (color || bench.train.image_shape[0] == 1) {
      WritePnm(stem + "_original" + ext, demo.original);
      WritePnm(stem + "_reconstruction" + ext, demo.reconstruction);
      if (demo.robust) WritePnm(stem + "_robust" + ext, *demo.robust);
    }
    std::vector<checkpoint::Record> records{
        checkpoint::TensorRecord(demo.original.shape(),
                                 {demo.original.values().begin(), demo.original.values().end()}),
        checkpoint::TensorRecord(demo.reconstruction.shape(),
                                 {demo.reconstruction.values().begin(),
                                  demo.reconstruction.values().end()})};
    if (demo.robust) {
      records.push_back(checkpoint::TensorRecord(
          demo.robust->shape(), {demo.robust->values().begin(), demo.robust->values().end()}));
    }
    checkpoint::WriteFile(stem + "_tensors.glab", records);
    rows.push_back(demo.record);
  }
  WriteCsvFile((fs::path(out_dir) / "attack_demo.csv").string(), rows);
}

void CmdTrainEvalNet(const ExperimentConfig& cfg, const std::string& out_dir) {
  EnsureDir(out_dir);
  Workbench bench = Workbench::Create(cfg);
  EvalNetTrainingLog log;
  EvalNet net = TrainEvalNet(bench.train, cfg.evalnet, &log);
  net.Save((fs::path(out_dir) / "evalnet.ckpt").string());
  std::ofstream train((fs::path(out_dir) / "evalnet_training.csv").string(), std::ios::binary);
  train << "epoch,loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    train << e << ',' << FormatNumber(log.epoch_loss[e]) << '\n';
  }
  std::ofstream eval((fs::path(out_dir) / "evalnet_eval.csv").string(), std::ios::binary);
  eval << "seed,ratio,mean_score\n";
  std::ofstream summary((fs::path(out_dir) / "evalnet_summary.csv").string(), std::ios::binary);
  summary << "seed,mean_abs_error,monotone_fraction,noise_high_fraction,natural_low_fraction\n";
  for (auto seed : cfg.seeds) {
    EvalNetQuality q = EvaluateEvalNet(net, bench.test, seed);
    for (std::size_t r = 0; r < q.ratios.size(); ++r) {
      eval << seed << ',' << FormatNumber(q.ratios[r]) << ',' << FormatNumber(q.mean_score[r])
           << '\n';
    }
    summary << seed << ',' << FormatNumber(q.mean_abs_error) << ','
            << FormatNumber(q.monotone_fraction) << ',' << FormatNumber(q.noise_high_fraction)
            << ',' << FormatNumber(q.natural_low_fraction) << '\n';
  }
}

}  // namespace glab
