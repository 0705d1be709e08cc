/* Copyright 2026 The Monoguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// monoguard: command-line front end for the training / attack pipeline.
//
//   monoguard <gen-data|train|distill|attack|eval|grid|certify|transfer>
//             --config <path> [--out <dir>] [--seed <u64>] ...
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime error. Errors are
// reported as a single line "error <kind>: <message>" on stderr.

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "monoguard/pipeline.hpp"

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace monoguard;

  CLI::App app{"Non-negative-weight defenses and enable-only attacks"};
  app.require_subcommand(1);
  std::string config_path, out_dir, model_path, source_path, target_path;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides run.out)");
    sub->add_option("--seed", seed, "run seed (overrides run.seed)");
  };
  auto* gen = app.add_subcommand("gen-data", "write the dataset and feature space");
  auto* trn = app.add_subcommand("train", "train one model");
  auto* dst = app.add_subcommand("distill", "train a distilled teacher/student pair");
  auto* atk = app.add_subcommand("attack", "attack detected test malware");
  auto* evl = app.add_subcommand("eval", "FPR/FNR/accuracy on the test split");
  auto* grd = app.add_subcommand("grid", "N1/N2 grid search heatmaps");
  auto* cer = app.add_subcommand("certify", "monotonicity certificate");
  auto* trf = app.add_subcommand("transfer", "transfer rate source -> target");
  for (auto* s : {gen, trn, dst, atk, evl, grd, cer, trf}) common(s);
  for (auto* s : {atk, evl, cer})
    s->add_option("--model", model_path, "model file")->required();
  trf->add_option("--source", source_path, "source model file")->required();
  trf->add_option("--target", target_path, "target model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error usage: " << one_line(e.what()) << '\n';
    return 1;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (seed) cfg.apply_seed(*seed);
    if (seed && cfg.grid.seeds.size() == 1) cfg.grid.seeds = {*seed};
    if (!out_dir.empty()) cfg.out_dir = out_dir;
  } catch (const Error& e) {
    std::cerr << "error " << e.kind() << ": " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    OutputSet out;
    if (*gen) out = cmd_gen_data(cfg);
    else if (*trn) out = cmd_train(cfg);
    else if (*dst) out = cmd_distill(cfg);
    else if (*atk) out = cmd_attack(cfg, model_path);
    else if (*evl) out = cmd_eval(cfg, model_path);
    else if (*grd) out = cmd_grid(cfg);
    else if (*cer) out = cmd_certify(cfg, model_path);
    else out = cmd_transfer(cfg, source_path, target_path);
    out.commit(cfg.out_dir);
    for (const auto& [name, content] : out.files())
      if (name == "metrics.txt" || name == "certificate.txt" ||
          name == "transfer.txt")
        std::cout << content;
  } catch (const ConfigError& e) {
    std::cerr << "error config: " << one_line(e.what()) << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << "error " << e.kind() << ": " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error runtime: " << one_line(e.what()) << '\n';
    return 2;
  }
  return 0;
}
