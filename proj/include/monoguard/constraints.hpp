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

// Non-negativity defenses: the N1/N2 penalties on negative values, their
// three placements (weights, hidden pre-activations, pre-sum products), hard
// projection and the negative-mass diagnostic.

#ifndef MONOGUARD_CONSTRAINTS_HPP_
#define MONOGUARD_CONSTRAINTS_HPP_

#include <cmath>
#include <span>
#include <vector>

#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/network.hpp"

namespace monoguard {

enum class HardScope { none, all_weights, manifest_monotone };
enum class Placement { weights, activations, presum };

inline const char* to_string(HardScope s) {
  switch (s) {
    case HardScope::all_weights: return "all_weights";
    case HardScope::manifest_monotone: return "manifest_monotone";
    default: return "none";
  }
}

inline const char* to_string(Placement p) {
  switch (p) {
    case Placement::activations: return "activations";
    case Placement::presum: return "presum";
    default: return "weights";
  }
}

struct ConstraintConfig {
  HardScope hard_scope = HardScope::none;
  double n1_coeff = 0.0;
  double n2_coeff = 0.0;
  Placement placement = Placement::weights;
  InitMode init;

  bool hard_nonneg() const { return hard_scope != HardScope::none; }
  bool has_penalty() const { return n1_coeff > 0.0 || n2_coeff > 0.0; }

  void validate() const {
    if (!(n1_coeff >= 0.0) || !(n2_coeff >= 0.0) || !std::isfinite(n1_coeff) ||
        !std::isfinite(n2_coeff))
      throw ParameterError("n1/n2 coefficients must be finite and >= 0");
    if (hard_nonneg() && has_penalty())
      throw ParameterError(
          "hard non-negative training takes no n1/n2 penalty");
  }
};

// N1(x) = |x| for x < 0, else 0.
inline double n1(double x) { return x < 0.0 ? -x : 0.0; }
// Subgradient; 0 at the kink.
inline double n1_grad(double x) { return x < 0.0 ? -1.0 : 0.0; }

// N2(x) = x^2 for x < 0, else 0.
inline double n2(double x) { return x < 0.0 ? x * x : 0.0; }
inline double n2_grad(double x) { return x < 0.0 ? 2.0 * x : 0.0; }

// n1_coeff * N1(x) + n2_coeff * N2(x)
inline double penalty_value(double x, const ConstraintConfig& c) {
  return c.n1_coeff * n1(x) + c.n2_coeff * n2(x);
}
inline double penalty_grad(double x, const ConstraintConfig& c) {
  return c.n1_coeff * n1_grad(x) + c.n2_coeff * n2_grad(x);
}

inline double negative_mass(const ModelParams& m) {
  double s = 0.0;
  for (const auto& L : m.layers)
    for (double w : L.weights) s += n1(w);
  return s;
}

struct PenaltyReport {
  double total = 0.0;
  std::vector<double> per_layer;
  double negative_mass = 0.0;
};

struct WeightPenalty {
  PenaltyReport report;
  Gradients gradients;
};

// Penalty over every weight entry of every layer; biases are exempt.
inline WeightPenalty weight_penalty(const ModelParams& m,
                                    const ConstraintConfig& cfg) {
  if (cfg.placement != Placement::weights)
    throw ParameterError("weight_penalty requires placement=weights");
  WeightPenalty out{{}, Gradients::zeros_like(m)};
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& W = m.layers[l].weights;
    auto& G = out.gradients.layers[l].weights;
    double layer_total = 0.0;
    for (std::size_t i = 0; i < W.size(); ++i) {
      if (W[i] >= 0.0) continue;
      layer_total += penalty_value(W[i], cfg);
      G[i] = penalty_grad(W[i], cfg);
      out.report.negative_mass -= W[i];
    }
    out.report.per_layer.push_back(layer_total);
    out.report.total += layer_total;
  }
  return out;
}

struct ActivationPenalty {
  double penalty = 0.0;
  std::vector<std::vector<double>> preact_grad;  // per hidden layer
};

// Penalty on every hidden-layer pre-activation of one forward pass (before
// ReLU; post-ReLU values are never negative). Callers average over a batch.
inline ActivationPenalty activation_penalty(const ForwardTrace& t,
                                            const ConstraintConfig& cfg) {
  ActivationPenalty out;
  const std::size_t hidden = t.pre.size() - 1;
  out.preact_grad.resize(hidden);
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto& z = t.pre[l];
    auto& g = out.preact_grad[l];
    g.assign(z.size(), 0.0);
    for (std::size_t j = 0; j < z.size(); ++j) {
      out.penalty += penalty_value(z[j], cfg);
      g[j] = penalty_grad(z[j], cfg);
    }
  }
  return out;
}

struct PresumPenalty {
  double penalty = 0.0;
  std::vector<double> weight_grad;  // in_dim x out_dim, row-major
  std::vector<double> input_grad;   // in_dim
};

// Penalty on each product x_k * W_kj entering the sum (xW)_j, for a dense
// input vector and a row-major in_dim x out_dim matrix.
inline PresumPenalty presum_penalty(std::span<const double> x,
                                    std::span<const double> W,
                                    std::size_t out_dim,
                                    const ConstraintConfig& cfg) {
  const std::size_t in_dim = x.size();
  if (W.size() != in_dim * out_dim)
    throw ParameterError("presum_penalty: matrix shape mismatch");
  PresumPenalty out{0.0, std::vector<double>(W.size(), 0.0),
                    std::vector<double>(in_dim, 0.0)};
  for (std::size_t k = 0; k < in_dim; ++k) {
    if (x[k] == 0.0) continue;
    for (std::size_t j = 0; j < out_dim; ++j) {
      const double w = W[k * out_dim + j];
      const double p = x[k] * w;
      if (p >= 0.0) continue;
      out.penalty += penalty_value(p, cfg);
      const double g = penalty_grad(p, cfg);
      out.weight_grad[k * out_dim + j] = g * x[k];
      out.input_grad[k] += g * w;
    }
  }
  return out;
}

// Pre-sum penalty over every layer of one forward pass. The first layer's
// inputs are the binary features, so its terms reduce to N(W_kj) over
// enabled k. Deeper layers use the post-dropout activations actually fed
// into the multiply; their gradient also flows back into those activations
// through `inject` (unscaled, like dL/dlogits). Weight gradients go straight
// into `acc` scaled by `scale`.
inline double presum_penalty(const ModelParams& m, const ForwardTrace& t,
                             const ConstraintConfig& cfg, Gradients* acc,
                             double scale, InjectedGradients* inject) {
  double total = 0.0;
  if (inject) inject->layer_input.assign(m.layers.size(), {});
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    const std::size_t out = L.spec.out_dim;
    if (l == 0) {
      for (auto k : t.input) {
        const double* w = L.weights.data() + std::size_t{k} * out;
        for (std::size_t j = 0; j < out; ++j) {
          if (w[j] >= 0.0) continue;
          total += penalty_value(w[j], cfg);
          if (acc)
            acc->layers[0].weights[std::size_t{k} * out + j] +=
                scale * penalty_grad(w[j], cfg);
        }
      }
      continue;
    }
    auto p = presum_penalty(t.post[l - 1], L.weights, out, cfg);
    total += p.penalty;
    if (acc) {
      auto& G = acc->layers[l].weights;
      for (std::size_t i = 0; i < G.size(); ++i) G[i] += scale * p.weight_grad[i];
    }
    if (inject) inject->layer_input[l] = std::move(p.input_grad);
  }
  return total;
}

// Which weights a hard scope clamps: every weight for all_weights; for
// manifest_monotone every weight except first-layer rows of code features.
inline bool in_hard_scope(HardScope scope, const FeatureSpace* space,
                          std::size_t layer, std::size_t row) {
  switch (scope) {
    case HardScope::none: return false;
    case HardScope::all_weights: return true;
    case HardScope::manifest_monotone:
      return layer > 0 || space->manifest_mask[row];
  }
  return false;
}

inline void check_scope_space(const ModelParams& m, HardScope scope,
                              const FeatureSpace* space) {
  if (scope != HardScope::manifest_monotone) return;
  if (!space)
    throw ParameterError("manifest_monotone scope needs a feature space");
  if (space->n_features != m.n_features())
    throw ParameterError("feature space does not match the model input width");
}

// Clamps in-scope weights to max(w, 0); biases are untouched. Idempotent.
inline void project_nonnegative_inplace(ModelParams& m, HardScope scope,
                                        const FeatureSpace* space = nullptr) {
  if (scope == HardScope::none) return;
  check_scope_space(m, scope, space);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& L = m.layers[l];
    const std::size_t out = L.spec.out_dim;
    for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
      if (!in_hard_scope(scope, space, l, i)) continue;
      double* w = L.weights.data() + i * out;
      for (std::size_t j = 0; j < out; ++j)
        if (w[j] < 0.0) w[j] = 0.0;
    }
  }
}

inline ModelParams project_nonnegative(ModelParams m, HardScope scope,
                                       const FeatureSpace* space = nullptr) {
  project_nonnegative_inplace(m, scope, space);
  return m;
}

// True when every in-scope weight is >= 0.
inline bool satisfies_scope(const ModelParams& m, HardScope scope,
                            const FeatureSpace* space = nullptr) {
  if (scope == HardScope::none) return true;
  check_scope_space(m, scope, space);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& L = m.layers[l];
    for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
      if (!in_hard_scope(scope, space, l, i)) continue;
      for (double w : L.row(i))
        if (w < 0.0) return false;
    }
  }
  return true;
}

}  // namespace monoguard

#endif  // MONOGUARD_CONSTRAINTS_HPP_
