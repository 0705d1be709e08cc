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

// Classification metrics, the N1/N2 grid search with heatmap CSVs,
// monotonicity certification and the fallback composition.

#ifndef MONOGUARD_EVALUATION_HPP_
#define MONOGUARD_EVALUATION_HPP_

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "monoguard/attack.hpp"
#include "monoguard/constraints.hpp"
#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/network.hpp"
#include "monoguard/text.hpp"
#include "monoguard/training.hpp"

namespace monoguard {

struct Metrics {
  double fpr = 0.0;
  double fnr = 0.0;
  double accuracy = 0.0;
  std::optional<double> mr;
  std::size_t n_benign = 0;
  std::size_t n_malware = 0;

  std::string to_text() const {
    std::ostringstream os;
    os << "fpr " << text::fixed(fpr, 6) << '\n'
       << "fnr " << text::fixed(fnr, 6) << '\n'
       << "accuracy " << text::fixed(accuracy, 6) << '\n';
    if (mr) os << "mr " << text::fixed(*mr, 6) << '\n';
    os << "benign " << n_benign << '\n' << "malware " << n_malware << '\n';
    return os.str();
  }
};

// Metrics for any sample -> label predictor. A class absent from the test
// set contributes a rate of 0.
template <class Predictor>
Metrics evaluate_with(Predictor&& predictor, const Dataset& test) {
  if (test.samples.empty()) throw ParameterError("empty test set");
  Metrics m;
  std::size_t fp = 0, fn = 0;
  for (const auto& s : test.samples) {
    const Label p = predictor(s);
    if (s.label == Label::malware) {
      ++m.n_malware;
      fn += p == Label::benign;
    } else {
      ++m.n_benign;
      fp += p == Label::malware;
    }
  }
  m.fpr = m.n_benign ? static_cast<double>(fp) / static_cast<double>(m.n_benign) : 0.0;
  m.fnr = m.n_malware ? static_cast<double>(fn) / static_cast<double>(m.n_malware) : 0.0;
  m.accuracy = static_cast<double>(test.samples.size() - fp - fn) /
               static_cast<double>(test.samples.size());
  return m;
}

inline Metrics evaluate(const ModelParams& model, const Dataset& test) {
  return evaluate_with([&](const Sample& s) { return predict(model, s); }, test);
}

// --- fallback composition ---------------------------------------------------

// Trusts the restricted model's malware verdicts and defers to the
// unrestricted model otherwise.
inline Label fallback_predict(const ModelParams& restricted,
                              const ModelParams& unrestricted,
                              const Sample& x) {
  if (restricted.n_features() != unrestricted.n_features() ||
      restricted.feature_space_id != unrestricted.feature_space_id)
    throw ParameterError("fallback models use different feature spaces");
  if (predict(restricted, x) == Label::malware) return Label::malware;
  return predict(unrestricted, x);
}

// --- monotonicity certificate -----------------------------------------------

struct Counterexample {
  std::size_t sample_id = 0;
  FeatureIndex feature = 0;
  double p_original = 0.0;
  double p_flipped = 0.0;
};

struct CertificateReport {
  HardScope scope = HardScope::all_weights;
  bool structural_pass = false;
  bool behavioral_pass = true;
  std::size_t trials = 0;
  bool structural_only = false;  // no behavioral trial was run
  std::vector<Counterexample> counterexamples;

  std::string to_text() const {
    std::ostringstream os;
    os << "structural " << (structural_pass ? "PASS" : "FAIL") << '\n';
    os << "behavioral " << (behavioral_pass ? "PASS" : "FAIL") << " trials "
       << trials;
    if (structural_only) os << " structural-only";
    os << '\n';
    for (const auto& c : counterexamples)
      os << "counterexample sample " << c.sample_id << " feature " << c.feature
         << " p_original " << text::precise(c.p_original) << " p_flipped "
         << text::precise(c.p_flipped) << '\n';
    return os.str();
  }
};

inline constexpr double kMonotoneTolerance = 1e-9;

// Structural check: a sigmoid head with every in-scope weight >= 0 is a
// monotone function of the in-scope inputs. Behavioral check: n_trials
// random (sample, absent in-scope feature) pairs must not lower p_malware by
// more than kMonotoneTolerance. Only the first few counterexamples are kept.
inline CertificateReport certify_monotone(const ModelParams& m,
                                          const FeatureSpace& space,
                                          std::span<const Sample> pool,
                                          std::size_t n_trials, Rng& rng,
                                          HardScope scope = HardScope::all_weights) {
  check_model_space(m, space);
  if (scope == HardScope::none)
    throw ParameterError("certify_monotone needs a hard scope");
  CertificateReport rep;
  rep.scope = scope;
  rep.structural_pass = m.head.variant == HeadVariant::sigmoid_single &&
                        satisfies_scope(m, scope, &space);

  std::vector<FeatureIndex> flippable;
  if (scope == HardScope::manifest_monotone) {
    flippable = space.manifest_indices();
  } else {
    flippable.resize(space.n_features);
    std::iota(flippable.begin(), flippable.end(), FeatureIndex{0});
  }
  if (n_trials == 0 || pool.empty()) {
    rep.structural_only = true;
    return rep;
  }
  std::uniform_int_distribution<std::size_t> pick_sample(0, pool.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_feature(0, flippable.size() - 1);
  constexpr std::size_t kMaxCounterexamples = 10;
  for (std::size_t trial = 0; trial < n_trials; ++trial) {
    const std::size_t sid = pick_sample(rng);
    const Sample& x = pool[sid];
    if (x.indices.size() >= space.n_features) continue;
    FeatureIndex f;
    do {
      f = flippable[pick_feature(rng)];
    } while (x.has(f) && x.indices.size() < flippable.size());
    if (x.has(f)) continue;  // every in-scope feature already enabled
    ++rep.trials;
    const double p0 = malware_probability(m, x);
    const double p1 = malware_probability(m, x.with(f));
    if (p1 < p0 - kMonotoneTolerance) {
      rep.behavioral_pass = false;
      if (rep.counterexamples.size() < kMaxCounterexamples)
        rep.counterexamples.push_back({sid, f, p0, p1});
    }
  }
  return rep;
}

// --- N1/N2 grid search ------------------------------------------------------

struct GridSpec {
  std::vector<double> n1_values{0, 0.1, 0.22, 0.46, 0.67, 1.0, 2.2};
  std::vector<double> n2_values{0, 0.1, 0.22, 0.46, 0.67, 1.0, 2.2};
  TrainConfig base_train;
  std::vector<std::uint64_t> seeds{1};

  void validate() const {
    if (n1_values.empty() || n2_values.empty() || seeds.empty())
      throw ParameterError("grid axes and seed list must be non-empty");
    for (double v : n1_values)
      if (!(v >= 0.0)) throw ParameterError("n1 values must be >= 0");
    for (double v : n2_values)
      if (!(v >= 0.0)) throw ParameterError("n2 values must be >= 0");
  }
};

struct GridRun {
  double n1 = 0.0, n2 = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;  // mr always set when ok
  double negative_mass = 0.0;
};

enum class GridMetric { mr, fnr, fpr };

struct GridReport {
  std::vector<double> n1_values, n2_values;
  std::vector<std::uint64_t> seeds;
  std::vector<GridRun> runs;  // n1-major, then n2, then seed

  const GridRun& run(std::size_t i1, std::size_t i2, std::size_t is) const {
    return runs[(i1 * n2_values.size() + i2) * seeds.size() + is];
  }

  // Mean over the seeds that trained successfully; NaN if none did.
  double cell_mean(std::size_t i1, std::size_t i2, GridMetric which) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t is = 0; is < seeds.size(); ++is) {
      const auto& r = run(i1, i2, is);
      if (!r.ok) continue;
      sum += which == GridMetric::mr    ? r.metrics.mr.value_or(0.0)
             : which == GridMetric::fnr ? r.metrics.fnr
                                        : r.metrics.fpr;
      ++n;
    }
    return n ? sum / static_cast<double>(n)
             : std::numeric_limits<double>::quiet_NaN();
  }

  // Heatmap: header "n1\n2,<n2 values>", one row per n1 value, 6 decimals.
  std::string heatmap_csv(GridMetric which) const {
    std::ostringstream os;
    os << "n1\\n2";
    for (double v : n2_values) os << ',' << text::shortest(v);
    os << '\n';
    for (std::size_t i1 = 0; i1 < n1_values.size(); ++i1) {
      os << text::shortest(n1_values[i1]);
      for (std::size_t i2 = 0; i2 < n2_values.size(); ++i2) {
        double v = cell_mean(i1, i2, which);
        os << ',' << (std::isnan(v) ? std::string("nan") : text::fixed(v, 6));
      }
      os << '\n';
    }
    return os.str();
  }

  // Long-form per-seed table.
  std::string runs_csv() const {
    std::ostringstream os;
    os << "n1,n2,seed,status,mr,fnr,fpr,accuracy,negmass\n";
    for (const auto& r : runs) {
      os << text::shortest(r.n1) << ',' << text::shortest(r.n2) << ','
         << r.seed << ',';
      if (!r.ok) {
        os << "error,,,,,\n";
        continue;
      }
      os << "ok," << text::fixed(r.metrics.mr.value_or(0.0), 6) << ','
         << text::fixed(r.metrics.fnr, 6) << ',' << text::fixed(r.metrics.fpr, 6)
         << ',' << text::fixed(r.metrics.accuracy, 6) << ','
         << text::precise(r.negative_mass) << '\n';
    }
    return os.str();
  }
};

// One grid cell run: weight-placed N1/N2 penalty, no hard scope.
inline GridRun grid_run(const Dataset& train_set, const Dataset& test_set,
                        const Architecture& arch, const TrainConfig& base,
                        double n1v, double n2v, std::uint64_t seed,
                        const AttackConfig& attack_cfg) {
  GridRun r{n1v, n2v, seed, false, {}, {}, 0.0};
  try {
    TrainConfig cfg = base.with_seed(seed);
    cfg.constraint.hard_scope = HardScope::none;
    cfg.constraint.placement = Placement::weights;
    cfg.constraint.n1_coeff = n1v;
    cfg.constraint.n2_coeff = n2v;
    auto trained = train(train_set, arch, cfg);
    r.metrics = evaluate(trained.model, test_set);
    auto malware = test_set.of_label(Label::malware);
    r.metrics.mr =
        misclassification_rate(trained.model, malware, test_set.space, attack_cfg)
            .rate;
    r.negative_mass = negative_mass(trained.model);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

// Trains, evaluates and attacks every (n1, n2, seed) combination. Runs are
// independent; up to `jobs` of them execute concurrently and a failing run is
// recorded rather than propagated.
inline GridReport grid_search(const Dataset& train_set, const Dataset& test_set,
                              const Architecture& arch, const GridSpec& spec,
                              const AttackConfig& attack_cfg,
                              unsigned jobs = 1) {
  spec.validate();
  GridReport rep{spec.n1_values, spec.n2_values, spec.seeds, {}};
  const std::size_t n2 = spec.n2_values.size(), ns = spec.seeds.size();
  const std::size_t total = spec.n1_values.size() * n2 * ns;
  rep.runs.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const std::size_t is = i % ns, i2 = (i / ns) % n2, i1 = i / (ns * n2);
      rep.runs[i] = grid_run(train_set, test_set, arch, spec.base_train,
                             spec.n1_values[i1], spec.n2_values[i2],
                             spec.seeds[is], attack_cfg);
    }
  };
  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return rep;
}

}  // namespace monoguard

#endif  // MONOGUARD_EVALUATION_HPP_
