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

// The experiment pipeline behind the command-line front end. Each command
// stages its output files in memory and commits them together, so a failing
// command leaves no partial output behind.

#ifndef MONOGUARD_PIPELINE_HPP_
#define MONOGUARD_PIPELINE_HPP_

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "monoguard/attack.hpp"
#include "monoguard/config.hpp"
#include "monoguard/constraints.hpp"
#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/evaluation.hpp"
#include "monoguard/network.hpp"
#include "monoguard/training.hpp"

namespace monoguard {

class OutputSet {
 public:
  void add(const std::string& name, std::string content) {
    files_[name] = std::move(content);
  }
  const std::map<std::string, std::string>& files() const { return files_; }

  // Writes every staged file via temporary names, then renames them into
  // place. On failure the temporaries are removed.
  void commit(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<fs::path> temps;
    try {
      for (const auto& [name, content] : files_) {
        auto tmp = dir / ("." + name + ".tmp");
        temps.push_back(tmp);
        std::ofstream os(tmp, std::ios::binary);
        os << content;
        os.close();
        if (!os) throw FormatError("cannot write " + tmp.string());
      }
      std::size_t i = 0;
      for (const auto& [name, content] : files_) fs::rename(temps[i++], dir / name);
    } catch (...) {
      std::error_code ec;
      for (const auto& t : temps) fs::remove(t, ec);
      throw;
    }
  }

 private:
  std::map<std::string, std::string> files_;
};

struct DataBundle {
  Dataset all;  // train followed by test when loaded from a pair of files
  Dataset train;
  Dataset test;
};

inline DataBundle load_data(const ExperimentConfig& c) {
  DataBundle b;
  if (c.source == DataSource::synthetic) {
    b.all = generate_synthetic(c.synth);
  } else {
    auto space = load_feature_space(c.space_path);
    if (!c.data_path.empty()) {
      b.all = load_dataset(c.data_path, space);
    } else {
      b.train = load_dataset(c.train_path, space);
      b.test = load_dataset(c.test_path, space);
      b.train.split_tag = SplitTag::train;
      b.test.split_tag = SplitTag::test;
      b.all = Dataset{space, b.train.samples, SplitTag::unsplit};
      b.all.samples.insert(b.all.samples.end(), b.test.samples.begin(),
                           b.test.samples.end());
      return b;
    }
  }
  std::tie(b.train, b.test) = split(b.all, c.test_fraction, c.seed);
  return b;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline ModelParams load_model(const std::string& path) {
  return deserialize(read_file(path));
}

inline std::string dataset_text(const Dataset& d) {
  std::ostringstream os;
  write_samples(os, d);
  return os.str();
}

inline OutputSet cmd_gen_data(const ExperimentConfig& c) {
  auto b = load_data(c);
  OutputSet out;
  std::ostringstream fs;
  write_feature_space(fs, b.all.space);
  out.add("space.txt", fs.str());
  out.add("dataset.txt", dataset_text(b.all));
  out.add("train.txt", dataset_text(b.train));
  out.add("test.txt", dataset_text(b.test));
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_train(const ExperimentConfig& c) {
  auto b = load_data(c);
  auto r = train(b.train, c.arch, c.train);
  OutputSet out;
  out.add("model.mgm", serialize(r.model));
  out.add("train_log.txt", r.log.to_text());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_distill(const ExperimentConfig& c) {
  auto b = load_data(c);
  auto r = train_distilled(b.train, c.arch, c.distill);
  OutputSet out;
  out.add("teacher.mgm", serialize(r.teacher.model));
  out.add("student.mgm", serialize(r.student.model));
  out.add("teacher_log.txt", r.teacher.log.to_text());
  out.add("student_log.txt", r.student.log.to_text());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline Metrics attack_metrics(const ModelParams& m, const Dataset& test,
                              const AttackConfig& cfg, AttackSummary* summary) {
  check_model_space(m, test.space);
  auto metrics = evaluate(m, test);
  auto malware = test.of_label(Label::malware);
  auto s = misclassification_rate(m, malware, test.space, cfg);
  metrics.mr = s.rate;
  if (summary) *summary = std::move(s);
  return metrics;
}

inline OutputSet cmd_attack(const ExperimentConfig& c, const std::string& model_path) {
  auto m = load_model(model_path);
  auto b = load_data(c);
  AttackSummary s;
  auto metrics = attack_metrics(m, b.test, c.attack, &s);
  std::string mtext = metrics.to_text();
  mtext += "detected " + std::to_string(s.detected) + "\nsuccesses " +
           std::to_string(s.successes) + '\n';
  if (s.empty_denominator) mtext += "warning no detected malware to attack\n";
  OutputSet out;
  out.add("attack_report.txt", s.report());
  out.add("metrics.txt", mtext);
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_eval(const ExperimentConfig& c, const std::string& model_path) {
  auto m = load_model(model_path);
  auto b = load_data(c);
  check_model_space(m, b.test.space);
  OutputSet out;
  out.add("metrics.txt", evaluate(m, b.test).to_text());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_grid(const ExperimentConfig& c) {
  auto b = load_data(c);
  auto rep = grid_search(b.train, b.test, c.arch, c.grid, c.attack, c.grid_jobs);
  OutputSet out;
  out.add("grid_mr.csv", rep.heatmap_csv(GridMetric::mr));
  out.add("grid_fnr.csv", rep.heatmap_csv(GridMetric::fnr));
  out.add("grid_fpr.csv", rep.heatmap_csv(GridMetric::fpr));
  out.add("grid_runs.csv", rep.runs_csv());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_certify(const ExperimentConfig& c, const std::string& model_path) {
  auto m = load_model(model_path);
  auto b = load_data(c);
  Rng rng(c.seed);
  auto rep = certify_monotone(m, b.all.space, b.all.samples, c.certify_trials,
                              rng, c.certify_scope);
  OutputSet out;
  out.add("certificate.txt", rep.to_text());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

inline OutputSet cmd_transfer(const ExperimentConfig& c, const std::string& source_path,
                              const std::string& target_path) {
  auto source = load_model(source_path);
  auto target = load_model(target_path);
  auto b = load_data(c);
  auto malware = b.test.of_label(Label::malware);
  auto t = transfer_rate(source, target, malware, b.test.space, c.attack);
  auto direct = misclassification_rate(target, malware, b.test.space, c.attack);
  std::ostringstream os;
  os << "transfer_rate " << text::fixed(t.rate, 6) << '\n'
     << "crafted " << t.crafted << '\n'
     << "transferred " << t.transferred << '\n'
     << "target_direct_mr " << text::fixed(direct.rate, 6) << '\n';
  if (t.empty_denominator) os << "warning no successful source perturbations\n";
  OutputSet out;
  out.add("transfer.txt", os.str());
  out.add("config.resolved.ini", c.resolved());
  return out;
}

}  // namespace monoguard

#endif  // MONOGUARD_PIPELINE_HPP_
