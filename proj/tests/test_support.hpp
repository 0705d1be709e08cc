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

// Test-only oracles. Everything here is written against the plain math
// (dense loops, finite differences, exhaustive search) and deliberately
// shares no code path with the library's sparse forward/backward.

#ifndef MONOGUARD_TESTS_TEST_SUPPORT_HPP_
#define MONOGUARD_TESTS_TEST_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <random>
#include <vector>

#include "monoguard/constraints.hpp"
#include "monoguard/dataset.hpp"
#include "monoguard/network.hpp"

namespace monoguard::testing {

struct OracleEval {
  double objective = 0.0;
  std::vector<double> kinks;  // every quantity the objective is kinked in
};

struct OracleOptions {
  double temperature = 1.0;
  const std::vector<std::vector<double>>* keep = nullptr;  // dropout scales
  bool with_penalty = true;
  ConstraintConfig penalty;
};

inline double oracle_n(double v, const ConstraintConfig& c) {
  return v < 0 ? c.n1_coeff * (-v) + c.n2_coeff * v * v : 0.0;
}

// Cross-entropy (+ placement penalty) of a dense input, computed from the
// definitions.
inline OracleEval oracle_objective(const ModelParams& m,
                                   const std::vector<double>& x,
                                   const Target& target,
                                   const OracleOptions& opt) {
  OracleEval ev;
  const auto& pc = opt.penalty;
  std::vector<double> a = x;
  std::vector<double> z;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    const bool hidden = l + 1 < m.layers.size();
    z.assign(L.spec.out_dim, 0.0);
    for (std::size_t j = 0; j < L.spec.out_dim; ++j) {
      double s = L.bias[j];
      for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
        double prod = a[i] * L.weights[i * L.spec.out_dim + j];
        s += prod;
        if (opt.with_penalty && pc.placement == Placement::presum) {
          ev.objective += oracle_n(prod, pc);
          ev.kinks.push_back(prod);
        }
      }
      z[j] = s;
    }
    if (hidden) {
      std::vector<double> next(z.size());
      for (std::size_t j = 0; j < z.size(); ++j) {
        const bool relu = L.spec.activation == Activation::relu;
        const bool penalised =
            opt.with_penalty && pc.placement == Placement::activations;
        if (relu || penalised) ev.kinks.push_back(z[j]);
        if (penalised) ev.objective += oracle_n(z[j], pc);
        next[j] = relu ? std::max(z[j], 0.0) : z[j];
        if (opt.keep) next[j] *= (*opt.keep)[l][j];
      }
      a = std::move(next);
    }
  }
  if (opt.with_penalty && pc.placement == Placement::weights) {
    for (const auto& L : m.layers)
      for (double w : L.weights) {
        ev.objective += oracle_n(w, pc);
        ev.kinks.push_back(w);
      }
  }
  // Cross-entropy straight from log-softmax / log-sigmoid.
  if (m.head.variant == HeadVariant::sigmoid_single) {
    double lp = -std::log1p(std::exp(-z[0]));  // log sigma(z)
    double lq = -std::log1p(std::exp(z[0]));   // log sigma(-z)
    ev.objective += -(target.p_malware * lp + target.p_benign * lq);
  } else {
    double u0 = z[0] / opt.temperature, u1 = z[1] / opt.temperature;
    double mx = std::max(u0, u1);
    double lse = mx + std::log(std::exp(u0 - mx) + std::exp(u1 - mx));
    ev.objective += -(target.p_benign * (u0 - lse) + target.p_malware * (u1 - lse));
  }
  return ev;
}

// Malware probability at temperature 1 from the definitions.
inline double oracle_p_malware(const ModelParams& m, const std::vector<double>& x) {
  std::vector<double> a = x;
  std::vector<double> z;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    z.assign(L.spec.out_dim, 0.0);
    for (std::size_t j = 0; j < L.spec.out_dim; ++j) {
      double s = L.bias[j];
      for (std::size_t i = 0; i < L.spec.in_dim; ++i)
        s += a[i] * L.weights[i * L.spec.out_dim + j];
      z[j] = s;
    }
    if (l + 1 < m.layers.size()) {
      a = z;
      if (L.spec.activation == Activation::relu)
        for (auto& v : a) v = std::max(v, 0.0);
    }
  }
  if (m.head.variant == HeadVariant::sigmoid_single) return 1.0 / (1.0 + std::exp(-z[0]));
  return 1.0 / (1.0 + std::exp(z[0] - z[1]));
}

inline std::vector<double> dense(const Sample& s, std::size_t n) {
  std::vector<double> x(n, 0.0);
  for (auto i : s.indices) x[i] = 1.0;
  return x;
}

// Central-difference check outcome for one scalar.
struct FdCheck {
  bool skipped = false;  // within 1e-3 of a kink
  double analytic = 0.0;
  double numeric = 0.0;
  bool ok = true;
};

inline constexpr double kFdStep = 1e-4;
inline constexpr double kFdRelTol = 1e-4;
inline constexpr double kKinkMargin = 1e-3;

inline bool fd_agrees(double analytic, double numeric) {
  const double scale = std::max(std::fabs(analytic), std::fabs(numeric));
  if (scale < 1e-6) return std::fabs(analytic - numeric) <= 1e-10;
  return std::fabs(analytic - numeric) / scale <= kFdRelTol;
}

// Perturbs `slot` by +-kFdStep and compares the central difference of `f`
// with `analytic`. Entries whose perturbation moves any kinked quantity
// within kKinkMargin of zero (or across it) are skipped.
inline FdCheck fd_check(double& slot, double analytic,
                        const std::function<OracleEval()>& f) {
  const double orig = slot;
  slot = orig + kFdStep;
  auto plus = f();
  slot = orig - kFdStep;
  auto minus = f();
  slot = orig;
  FdCheck c;
  c.analytic = analytic;
  c.numeric = (plus.objective - minus.objective) / (2 * kFdStep);
  for (std::size_t q = 0; q < plus.kinks.size(); ++q) {
    const double hi = plus.kinks[q], lo = minus.kinks[q];
    if (hi == lo) continue;  // independent of this entry
    if ((hi > 0) != (lo > 0) || (hi < 0) != (lo < 0) ||
        std::min(std::fabs(hi), std::fabs(lo)) < kKinkMargin) {
      c.skipped = true;
      return c;
    }
  }
  c.ok = fd_agrees(analytic, c.numeric);
  return c;
}

struct TinyNetSpec {
  std::size_t n_features = 20;
  std::size_t h1 = 8, h2 = 8;
  HeadKind head;
  double weight_sd = 0.5;
  double bias_sd = 0.3;
};

inline ModelParams random_net(const TinyNetSpec& s, Rng& rng) {
  Architecture arch{{s.h1, s.h2}, s.head};
  auto m = init(arch.layers(s.n_features), s.head, {InitVariant::glorot_normal, rng()});
  std::normal_distribution<double> w(0.0, s.weight_sd), b(0.0, s.bias_sd);
  for (auto& L : m.layers) {
    for (auto& v : L.weights) v = w(rng);
    for (auto& v : L.bias) v = b(rng);
  }
  return m;
}

inline Sample random_sample(std::size_t n, double density, Label label, Rng& rng) {
  std::bernoulli_distribution on(density);
  Sample s;
  s.label = label;
  for (std::size_t i = 0; i < n; ++i)
    if (on(rng)) s.indices.push_back(static_cast<FeatureIndex>(i));
  return s;
}

inline FeatureSpace random_space(std::size_t n, double manifest_share, Rng& rng) {
  std::bernoulli_distribution on(manifest_share);
  FeatureSpace fs{n, std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) fs.manifest_mask[i] = on(rng);
  fs.manifest_mask[n - 1] = true;
  return fs;
}

// Smallest number of absent manifest features (up to max_flips) whose
// joint enabling makes the oracle probability drop below 0.5; -1 if none.
inline int brute_force_min_flips(const ModelParams& m, const Sample& x,
                                 const FeatureSpace& fs, int max_flips) {
  std::vector<FeatureIndex> cand;
  for (std::size_t i = 0; i < fs.n_features; ++i)
    if (fs.manifest_mask[i] && !x.has(static_cast<FeatureIndex>(i)))
      cand.push_back(static_cast<FeatureIndex>(i));
  auto base = dense(x, fs.n_features);
  const std::size_t n = cand.size();
  for (int k = 1; k <= max_flips && static_cast<std::size_t>(k) <= n; ++k) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
      auto v = base;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) v[cand[i]] = 1.0;
      if (oracle_p_malware(m, v) < 0.5) return k;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return -1;
}

// Feature (lowest index on ties) whose single enabling minimises the oracle
// probability.
inline FeatureIndex brute_force_best_single(const ModelParams& m, const Sample& x,
                                            const FeatureSpace& fs) {
  auto base = dense(x, fs.n_features);
  double best = std::numeric_limits<double>::infinity();
  FeatureIndex arg = 0;
  for (std::size_t i = 0; i < fs.n_features; ++i) {
    if (!fs.manifest_mask[i] || x.has(static_cast<FeatureIndex>(i))) continue;
    auto v = base;
    v[i] = 1.0;
    double p = oracle_p_malware(m, v);
    if (p < best) {
      best = p;
      arg = static_cast<FeatureIndex>(i);
    }
  }
  return arg;
}

}  // namespace monoguard::testing

#endif  // MONOGUARD_TESTS_TEST_SUPPORT_HPP_
