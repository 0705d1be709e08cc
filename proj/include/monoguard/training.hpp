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

#ifndef MONOGUARD_TRAINING_HPP_
#define MONOGUARD_TRAINING_HPP_

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "monoguard/constraints.hpp"
#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/network.hpp"
#include "monoguard/text.hpp"

namespace monoguard {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 1000;
  double malware_ratio = 0.3;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double dropout_rate = 0.5;
  ConstraintConfig constraint;
  std::uint64_t seed = 1;

  // Same run with every stream (batches, dropout, init) re-seeded.
  TrainConfig with_seed(std::uint64_t s) const {
    TrainConfig c = *this;
    c.seed = s;
    c.constraint.init.seed = s;
    return c;
  }

  void validate() const {
    if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw ParameterError("momentum must lie in [0,1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ParameterError("dropout_rate must lie in [0,1)");
    if (!(malware_ratio >= 0.0 && malware_ratio <= 1.0))
      throw ParameterError("malware_ratio must lie in [0,1]");
    constraint.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean cross-entropy over the epoch's batches
  double penalty = 0.0;   // mean placement penalty per step
  double negative_mass = 0.0;
  double train_accuracy = 0.0;  // running accuracy on the training batches
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  std::string to_text() const {
    std::ostringstream os;
    for (const auto& e : epochs)
      os << "epoch " << e.epoch << " loss " << text::precise(e.loss)
         << " penalty " << text::precise(e.penalty) << " negmass "
         << text::precise(e.negative_mass) << " train_acc "
         << text::precise(e.train_accuracy) << '\n';
    return os.str();
  }
};

struct TrainResult {
  ModelParams model;
  TrainLog log;
};

namespace detail {

inline void momentum_step(std::vector<double>& param, std::vector<double>& vel,
                          const std::vector<double>& grad, double lr,
                          double mu) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    vel[i] = mu * vel[i] - lr * grad[i];
    param[i] += vel[i];
  }
}

}  // namespace detail

// Gradient of cross-entropy plus the placement penalty for a single sample,
// including the dense input gradient. Matches one sample's contribution to a
// training step with batch size 1.
inline Gradients objective_gradients(const ModelParams& m, const ForwardTrace& t,
                                     const Target& target,
                                     const ConstraintConfig& cc) {
  Gradients g = Gradients::zeros_like(m);
  InjectedGradients inject;
  const bool penalised = cc.has_penalty();
  if (penalised && cc.placement == Placement::activations)
    inject.preact = activation_penalty(t, cc).preact_grad;
  else if (penalised && cc.placement == Placement::presum)
    presum_penalty(m, t, cc, &g, 1.0, &inject);
  auto delta0 =
      backprop(m, t, cross_entropy_grad(t, target, m.head), &g, 1.0, &inject);
  g.input.resize(m.n_features());
  for (std::size_t k = 0; k < g.input.size(); ++k)
    g.input[k] = input_gradient_at(m, delta0, static_cast<FeatureIndex>(k));
  if (penalised && cc.placement == Placement::presum) {
    // d/dx_k of N(x_k * W_kj) at x_k = 1 for the enabled inputs.
    const auto& L = m.layers.front();
    for (auto k : t.input)
      for (double w : L.row(k)) g.input[k] += penalty_grad(w, cc) * w;
  }
  if (penalised && cc.placement == Placement::weights)
    g.add(weight_penalty(m, cc).gradients);
  return g;
}

// Mini-batch SGD with momentum. `targets`, when given, holds one target
// distribution per sample of `d` (soft labels); otherwise the hard labels
// are used. Each step: forward with dropout, cross-entropy plus the
// placement penalty, backward, momentum update, then projection when a hard
// scope is set. Models under a hard scope are projected once right after
// initialisation as well, so every checkpoint satisfies the scope.
inline TrainResult train_on_targets(const Dataset& d, const Architecture& arch,
                                    const TrainConfig& cfg,
                                    std::span<const Target> targets = {}) {
  cfg.validate();
  if (d.count(Label::malware) == 0 || d.count(Label::benign) == 0)
    throw ParameterError("training data needs both labels");
  if (!targets.empty() && targets.size() != d.samples.size())
    throw ParameterError("one target per training sample is required");
  for (const auto& t : targets) t.validate();

  const auto& cc = cfg.constraint;
  const FeatureSpace* space = &d.space;
  TrainResult r;
  r.model = init(arch.layers(d.space.n_features), arch.head, cc.init,
                 d.space.checksum());
  project_nonnegative_inplace(r.model, cc.hard_scope, space);
  ModelParams& m = r.model;

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Gradients grad = Gradients::zeros_like(m);
  Gradients vel = Gradients::zeros_like(m);
  const std::size_t steps =
      (d.samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);
  const bool penalised = cc.has_penalty();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0, pen_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      auto batch =
          sample_batch_indices(d, cfg.batch_size, cfg.malware_ratio, rng);
      grad.set_zero();
      double batch_loss = 0.0, batch_pen = 0.0;
      for (auto si : batch) {
        const Sample& x = d.samples[si];
        const Target tgt =
            targets.empty() ? Target::hard(x.label) : targets[si];
        std::optional<DropoutSpec> drop;
        if (cfg.dropout_rate > 0.0) drop = DropoutSpec{cfg.dropout_rate, &rng};
        auto t = forward(m, x, drop);
        batch_loss += cross_entropy(t, tgt, m.head);
        const Label guess = t.p_malware() >= 0.5 ? Label::malware : Label::benign;
        correct += guess == x.label;
        ++seen;
        auto dz = cross_entropy_grad(t, tgt, m.head);

        InjectedGradients inject;
        if (penalised && cc.placement == Placement::activations) {
          auto ap = activation_penalty(t, cc);
          batch_pen += ap.penalty;
          inject.preact = std::move(ap.preact_grad);
        } else if (penalised && cc.placement == Placement::presum) {
          batch_pen += presum_penalty(m, t, cc, &grad, inv_b, &inject);
        }
        backprop(m, t, dz, &grad, inv_b, &inject);
      }
      batch_loss *= inv_b;
      batch_pen *= inv_b;
      if (penalised && cc.placement == Placement::weights) {
        auto wp = weight_penalty(m, cc);
        batch_pen += wp.report.total;
        grad.add(wp.gradients);
      }
      if (!std::isfinite(batch_loss) || !std::isfinite(batch_pen))
        throw TrainingError("non-finite objective at epoch " +
                            std::to_string(epoch) + " step " +
                            std::to_string(step + 1));
      loss_sum += batch_loss;
      pen_sum += batch_pen;

      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        detail::momentum_step(m.layers[l].weights, vel.layers[l].weights,
                              grad.layers[l].weights, cfg.learning_rate,
                              cfg.momentum);
        detail::momentum_step(m.layers[l].bias, vel.layers[l].bias,
                              grad.layers[l].bias, cfg.learning_rate,
                              cfg.momentum);
      }
      project_nonnegative_inplace(m, cc.hard_scope, space);
    }
    for (const auto& L : m.layers)
      for (double w : L.weights)
        if (!std::isfinite(w))
          throw TrainingError("non-finite weight after epoch " +
                              std::to_string(epoch));
    r.log.epochs.push_back({epoch, loss_sum / static_cast<double>(steps),
                            pen_sum / static_cast<double>(steps),
                            negative_mass(m),
                            static_cast<double>(correct) /
                                static_cast<double>(seen)});
  }
  return r;
}

inline TrainResult train(const Dataset& d, const Architecture& arch,
                         const TrainConfig& cfg) {
  return train_on_targets(d, arch, cfg);
}

// Teacher output distribution at `temperature`, one per sample of d.
inline std::vector<Target> soft_labels(const ModelParams& teacher,
                                       const Dataset& d, double temperature) {
  std::vector<Target> out;
  out.reserve(d.samples.size());
  for (const auto& s : d.samples) {
    auto t = forward(teacher, s, std::nullopt, temperature);
    out.push_back({t.probs[0], t.probs[1]});
  }
  return out;
}

struct DistillConfig {
  double temperature = 100.0;
  TrainConfig teacher_train;
  TrainConfig student_train;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ParameterError("distillation temperature must be > 0");
    teacher_train.validate();
    student_train.validate();
  }
};

struct DistillResult {
  TrainResult teacher;
  TrainResult student;
};

// Two-stage defensive distillation. The teacher is trained at temperature T
// on hard labels; its T-softened outputs on the training set become the
// targets of a fresh student of the same architecture, also trained at T.
// Both models record T; prediction always happens at temperature 1.
inline DistillResult train_distilled(const Dataset& d, Architecture arch,
                                     const DistillConfig& cfg) {
  cfg.validate();
  if (arch.head.variant != HeadVariant::softmax_pair)
    throw ParameterError("distillation needs a softmax_pair head");
  arch.head.temperature = cfg.temperature;
  DistillResult out;
  out.teacher = train(d, arch, cfg.teacher_train);
  auto targets = soft_labels(out.teacher.model, d, cfg.temperature);
  out.student = train_on_targets(d, arch, cfg.student_train, targets);
  return out;
}

}  // namespace monoguard

#endif  // MONOGUARD_TRAINING_HPP_
