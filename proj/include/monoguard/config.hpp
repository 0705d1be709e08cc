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

// Experiment configuration: a flat `key = value` text file with [section]
// headers, and its mapping onto the library's config structs.

#ifndef MONOGUARD_CONFIG_HPP_
#define MONOGUARD_CONFIG_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "monoguard/attack.hpp"
#include "monoguard/constraints.hpp"
#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/evaluation.hpp"
#include "monoguard/network.hpp"
#include "monoguard/text.hpp"
#include "monoguard/training.hpp"

namespace monoguard {

// Parsed `section.key -> value` pairs. Lines are `[section]`, `key = value`,
// blank, or comments starting with '#' or ';'.
class IniFile {
 public:
  static IniFile parse(std::istream& is, const std::string& origin = "config") {
    IniFile ini;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      auto s = text::trim(line);
      if (s.empty() || s.front() == '#' || s.front() == ';') continue;
      auto where = origin + " line " + std::to_string(line_no);
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(where + ": unterminated section");
        section = std::string(text::trim(s.substr(1, s.size() - 2)));
        if (section.empty()) throw ConfigError(where + ": empty section name");
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError(where + ": expected key = value");
      auto key = std::string(text::trim(s.substr(0, eq)));
      if (key.empty()) throw ConfigError(where + ": empty key");
      auto full = section.empty() ? key : section + "." + key;
      if (ini.values_.count(full))
        throw ConfigError(where + ": duplicate key '" + full + "'");
      ini.values_[full] = std::string(text::trim(s.substr(eq + 1)));
    }
    return ini;
  }

  static IniFile parse_string(const std::string& s) {
    std::istringstream is(s);
    return parse(is);
  }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_[key] = true;
    return it->second;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

enum class DataSource { synthetic, files };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  DataSource source = DataSource::synthetic;
  SynthSpec synth;
  std::string data_path, train_path, test_path, space_path;
  double test_fraction = 0.2;

  Architecture arch;
  TrainConfig train;
  DistillConfig distill;
  AttackConfig attack;
  GridSpec grid;
  unsigned grid_jobs = 1;
  std::size_t certify_trials = 10000;
  HardScope certify_scope = HardScope::all_weights;

  // Applies the run seed to every seeded component.
  void apply_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    train = train.with_seed(s);
    distill.teacher_train = distill.teacher_train.with_seed(s);
    distill.student_train = distill.student_train.with_seed(s);
    grid.base_train = grid.base_train.with_seed(s);
  }

  // Canonical text form of every effective setting.
  std::string resolved() const;
};

namespace config_detail {

template <class T>
T parse_number(const std::string& key, const std::string& v);

template <>
inline double parse_number<double>(const std::string& key, const std::string& v) {
  auto d = text::parse_double(v);
  if (!d || !std::isfinite(*d))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

template <>
inline std::uint64_t parse_number<std::uint64_t>(const std::string& key,
                                                 const std::string& v) {
  auto d = text::parse_u64(v);
  if (!d) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return *d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  for (auto f : text::split(v, ',')) {
    auto s = std::string(text::trim(f));
    if (s.empty()) throw ConfigError(key + ": empty list element");
    out.push_back(parse_number<T>(key, s));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += text::shortest(xs[i]);
    else
      s += std::to_string(xs[i]);
  }
  return s;
}

inline HardScope parse_scope(const std::string& key, const std::string& v) {
  if (v == "none") return HardScope::none;
  if (v == "all_weights") return HardScope::all_weights;
  if (v == "manifest_monotone") return HardScope::manifest_monotone;
  throw ConfigError(key + ": unknown hard scope '" + v + "'");
}

inline Placement parse_placement(const std::string& key, const std::string& v) {
  if (v == "weights") return Placement::weights;
  if (v == "activations") return Placement::activations;
  if (v == "presum") return Placement::presum;
  throw ConfigError(key + ": unknown placement '" + v + "'");
}

inline InitVariant parse_init(const std::string& key, const std::string& v) {
  if (v == "glorot_normal") return InitVariant::glorot_normal;
  if (v == "abs_glorot_normal") return InitVariant::abs_glorot_normal;
  throw ConfigError(key + ": unknown init mode '" + v + "'");
}

inline HeadVariant parse_head(const std::string& key, const std::string& v) {
  if (v == "sigmoid_single") return HeadVariant::sigmoid_single;
  if (v == "softmax_pair") return HeadVariant::softmax_pair;
  throw ConfigError(key + ": unknown head '" + v + "'");
}

inline const char* init_name(InitVariant v) {
  return v == InitVariant::abs_glorot_normal ? "abs_glorot_normal"
                                             : "glorot_normal";
}

}  // namespace config_detail

// Builds an ExperimentConfig from parsed key/values. Relative paths are
// resolved against `base_dir`. Unknown keys are rejected.
inline ExperimentConfig make_config(const IniFile& ini,
                                    const std::filesystem::path& base_dir = {}) {
  using namespace config_detail;
  ExperimentConfig c;
  auto num = [&](const std::string& key, auto& dst) {
    if (auto v = ini.get(key))
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(
          parse_number<std::conditional_t<
              std::is_floating_point_v<std::remove_reference_t<decltype(dst)>>,
              double, std::uint64_t>>(key, *v));
  };
  auto path = [&](const std::string& key, std::string& dst) {
    if (auto v = ini.get(key)) {
      std::filesystem::path p(*v);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      dst = p.string();
    }
  };

  num("run.seed", c.seed);
  if (auto v = ini.get("run.out")) c.out_dir = *v;

  if (auto v = ini.get("dataset.source")) {
    if (*v == "synthetic")
      c.source = DataSource::synthetic;
    else if (*v == "files")
      c.source = DataSource::files;
    else
      throw ConfigError("dataset.source: expected synthetic or files");
  }
  num("dataset.n_features", c.synth.n_features);
  num("dataset.manifest_fraction", c.synth.manifest_fraction);
  num("dataset.n_samples", c.synth.n_samples);
  num("dataset.malware_fraction", c.synth.malware_fraction);
  num("dataset.mean_density", c.synth.mean_density);
  num("dataset.n_rules", c.synth.n_rules);
  num("dataset.test_fraction", c.test_fraction);
  path("dataset.data", c.data_path);
  path("dataset.train", c.train_path);
  path("dataset.test", c.test_path);
  path("dataset.space", c.space_path);

  if (auto v = ini.get("model.hidden")) {
    std::vector<std::size_t> h;
    for (auto x : parse_list<std::uint64_t>("model.hidden", *v)) {
      if (x == 0) throw ConfigError("model.hidden: widths must be positive");
      h.push_back(x);
    }
    c.arch.hidden = h;
  }
  if (auto v = ini.get("model.head")) c.arch.head.variant = parse_head("model.head", *v);
  num("model.temperature", c.arch.head.temperature);

  num("train.epochs", c.train.epochs);
  num("train.batch_size", c.train.batch_size);
  num("train.malware_ratio", c.train.malware_ratio);
  num("train.learning_rate", c.train.learning_rate);
  num("train.momentum", c.train.momentum);
  num("train.dropout_rate", c.train.dropout_rate);

  auto& cc = c.train.constraint;
  if (auto v = ini.get("constraint.hard_scope"))
    cc.hard_scope = parse_scope("constraint.hard_scope", *v);
  num("constraint.n1", cc.n1_coeff);
  num("constraint.n2", cc.n2_coeff);
  if (auto v = ini.get("constraint.placement"))
    cc.placement = parse_placement("constraint.placement", *v);
  if (auto v = ini.get("constraint.init"))
    cc.init.variant = parse_init("constraint.init", *v);

  c.distill.temperature = 100.0;
  num("distill.temperature", c.distill.temperature);
  c.distill.teacher_train = c.train;
  c.distill.student_train = c.train;
  num("distill.teacher_epochs", c.distill.teacher_train.epochs);
  num("distill.student_epochs", c.distill.student_train.epochs);
  num("distill.learning_rate", c.distill.teacher_train.learning_rate);
  c.distill.student_train.learning_rate = c.distill.teacher_train.learning_rate;

  num("attack.max_iterations", c.attack.max_iterations);
  if (auto v = ini.get("attack.require_negative_gradient"))
    c.attack.require_negative_gradient =
        parse_bool("attack.require_negative_gradient", *v);

  c.grid.base_train = c.train;
  if (auto v = ini.get("grid.n1_values"))
    c.grid.n1_values = parse_list<double>("grid.n1_values", *v);
  if (auto v = ini.get("grid.n2_values"))
    c.grid.n2_values = parse_list<double>("grid.n2_values", *v);
  bool explicit_grid_seeds = false;
  if (auto v = ini.get("grid.seeds")) {
    c.grid.seeds = parse_list<std::uint64_t>("grid.seeds", *v);
    explicit_grid_seeds = true;
  }
  num("grid.jobs", c.grid_jobs);

  num("certify.trials", c.certify_trials);
  c.certify_scope = cc.hard_scope == HardScope::none ? HardScope::all_weights
                                                     : cc.hard_scope;
  if (auto v = ini.get("certify.scope"))
    c.certify_scope = parse_scope("certify.scope", *v);

  if (auto unused = ini.unused_keys(); !unused.empty())
    throw ConfigError("unknown key '" + unused.front() + "'");

  c.apply_seed(c.seed);
  if (!explicit_grid_seeds) c.grid.seeds = {c.seed};

  // Validation.
  if (c.source == DataSource::synthetic) {
    try {
      c.synth.validate();
    } catch (const ParameterError& e) {
      throw ConfigError(std::string("dataset: ") + e.what());
    }
  } else {
    if (c.space_path.empty()) throw ConfigError("dataset.space is required for files");
    const bool whole = !c.data_path.empty();
    const bool pair = !c.train_path.empty() || !c.test_path.empty();
    if (whole == pair)
      throw ConfigError("dataset: give either data or both train and test");
    if (pair && (c.train_path.empty() || c.test_path.empty()))
      throw ConfigError("dataset: train and test must be given together");
    for (const auto* p : {&c.space_path, &c.data_path, &c.train_path, &c.test_path})
      if (!p->empty() && !std::filesystem::exists(*p))
        throw ConfigError("dataset: path does not exist: " + *p);
  }
  if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
    throw ConfigError("dataset.test_fraction must lie in (0,1)");
  if (c.certify_scope == HardScope::none)
    throw ConfigError("certify.scope must be a hard scope");
  try {
    c.arch.head.validate();
    c.train.validate();
    c.distill.validate();
    c.attack.validate();
    c.grid.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  auto ini = IniFile::parse(is, path);
  return make_config(ini, std::filesystem::path(path).parent_path());
}

inline std::string ExperimentConfig::resolved() const {
  using namespace config_detail;
  std::ostringstream os;
  const auto& cc = train.constraint;
  os << "[run]\nseed = " << seed << "\nout = " << out_dir << "\n\n";
  os << "[dataset]\nsource = "
     << (source == DataSource::synthetic ? "synthetic" : "files") << '\n';
  if (source == DataSource::synthetic) {
    os << "n_features = " << synth.n_features
       << "\nmanifest_fraction = " << text::shortest(synth.manifest_fraction)
       << "\nn_samples = " << synth.n_samples
       << "\nmalware_fraction = " << text::shortest(synth.malware_fraction)
       << "\nmean_density = " << text::shortest(synth.mean_density)
       << "\nn_rules = " << synth.n_rules << '\n';
  } else {
    os << "space = " << space_path << '\n';
    if (!data_path.empty()) os << "data = " << data_path << '\n';
    if (!train_path.empty())
      os << "train = " << train_path << "\ntest = " << test_path << '\n';
  }
  os << "test_fraction = " << text::shortest(test_fraction) << "\n\n";
  os << "[model]\nhidden = " << join(arch.hidden)
     << "\nhead = " << to_string(arch.head.variant)
     << "\ntemperature = " << text::shortest(arch.head.temperature) << "\n\n";
  os << "[train]\nepochs = " << train.epochs << "\nbatch_size = " << train.batch_size
     << "\nmalware_ratio = " << text::shortest(train.malware_ratio)
     << "\nlearning_rate = " << text::shortest(train.learning_rate)
     << "\nmomentum = " << text::shortest(train.momentum)
     << "\ndropout_rate = " << text::shortest(train.dropout_rate) << "\n\n";
  os << "[constraint]\nhard_scope = " << to_string(cc.hard_scope)
     << "\nn1 = " << text::shortest(cc.n1_coeff)
     << "\nn2 = " << text::shortest(cc.n2_coeff)
     << "\nplacement = " << to_string(cc.placement)
     << "\ninit = " << init_name(cc.init.variant) << "\n\n";
  os << "[distill]\ntemperature = " << text::shortest(distill.temperature)
     << "\nteacher_epochs = " << distill.teacher_train.epochs
     << "\nstudent_epochs = " << distill.student_train.epochs
     << "\nlearning_rate = " << text::shortest(distill.teacher_train.learning_rate)
     << "\n\n";
  os << "[attack]\nmax_iterations = " << attack.max_iterations
     << "\nrequire_negative_gradient = "
     << (attack.require_negative_gradient ? "true" : "false") << "\n\n";
  os << "[grid]\nn1_values = " << join(grid.n1_values)
     << "\nn2_values = " << join(grid.n2_values) << "\nseeds = " << join(grid.seeds)
     << "\njobs = " << grid_jobs << "\n\n";
  os << "[certify]\ntrials = " << certify_trials
     << "\nscope = " << to_string(certify_scope) << '\n';
  return os.str();
}

}  // namespace monoguard

#endif  // MONOGUARD_CONFIG_HPP_
