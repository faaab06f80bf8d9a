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

// glab: experiment driver.

#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "glab/errors.hpp"
#include "glab/experiments.hpp"

namespace {

using Command = std::function<void(const glab::ExperimentConfig&, const std::string&)>;

struct Verb {
  const char* name;
  const char* help;
  Command run;
};

}  // namespace

int main(int argc, char** argv) {
  const Verb verbs[] = {
      {"tradeoff", "PMM/PSNR rows for every sweep cell", glab::CmdTradeoff},
      {"ablation", "refiner knob ablation", glab::CmdAblation},
      {"timing", "per-iteration defense wall time", glab::CmdTiming},
      {"validate-weights", "pruning strategy and per-layer noise comparisons",
       glab::CmdValidateWeights},
      {"attack-demo", "image dumps and one metrics row per seed", glab::CmdAttackDemo},
      {"train-evalnet", "train and evaluate the evaluation network",
       glab::CmdTrainEvalNet},
  };

  CLI::App app{"glab: gradient leakage defense benchmark"};
  app.require_subcommand(1);
  std::string config_path, out_dir, seeds;
  std::vector<std::string> overrides;
  std::map<CLI::App*, const Verb*> lookup;
  for (const Verb& v : verbs) {
    CLI::App* sub = app.add_subcommand(v.name, v.help);
    sub->add_option("--config", config_path, "flat section.key = value file")->required();
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seeds", seeds, "comma-separated seed list (overrides run.seeds)");
    sub->add_option("--set", overrides, "extra section.key=value override");
    lookup[sub] = &v;
  }
  CLI11_PARSE(app, argc, argv);

  try {
    glab::ConfigFile file = glab::ConfigFile::Load(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw glab::ConfigError("--set expects key=value");
      file.Set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (!seeds.empty()) file.Set("run.seeds", seeds);
    glab::ExperimentConfig cfg = glab::ExperimentConfig::FromFile(file);
    cfg.Validate();
    for (auto& [sub, verb] : lookup) {
      if (sub->parsed()) verb->run(cfg, out_dir);
    }
  } catch (const glab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
