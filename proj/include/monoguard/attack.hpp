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

// Enable-only, manifest-restricted greedy gradient attack, plus the batch
// misclassification rate and cross-model transfer measurements.

#ifndef MONOGUARD_ATTACK_HPP_
#define MONOGUARD_ATTACK_HPP_

#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/network.hpp"

namespace monoguard {

struct AttackConfig {
  std::size_t max_iterations = 20;
  bool require_negative_gradient = true;

  void validate() const {
    if (max_iterations == 0) throw ParameterError("max_iterations must be >= 1");
  }
};

enum class StopReason { success, cutoff, no_negative_gradient, no_candidates };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::success: return "success";
    case StopReason::cutoff: return "cutoff";
    case StopReason::no_negative_gradient: return "no_negative_gradient";
    default: return "no_candidates";
  }
}

struct AttackResult {
  Sample original;
  Sample perturbed;
  std::vector<FeatureIndex> enabled_features;  // in the order they were enabled
  std::size_t iterations_used = 0;
  bool success = false;
  StopReason stop = StopReason::cutoff;
};

inline void check_model_space(const ModelParams& m, const FeatureSpace& space) {
  if (m.n_features() != space.n_features)
    throw ParameterError("model input width differs from the feature space");
  if (m.feature_space_id != 0 && m.feature_space_id != space.checksum())
    throw ParameterError("model was trained on a different feature space");
}

// Greedy attack on a detected malware sample. Each iteration differentiates
// the malware probability (temperature 1) with respect to the inputs, enables
// the absent manifest feature with the most negative gradient (lowest index
// on ties) and stops once the prediction flips to benign, at the cutoff, or
// when no candidate has a strictly negative gradient (if required).
inline AttackResult craft(const ModelParams& m, const Sample& x,
                          const FeatureSpace& space, const AttackConfig& cfg) {
  cfg.validate();
  check_model_space(m, space);
  if (x.label != Label::malware)
    throw ParameterError("attack target must be labelled malware");
  if (predict(m, x) != Label::malware)
    throw ParameterError("attack target must be detected as malware");

  AttackResult r{x, x, {}, 0, false, StopReason::cutoff};
  const auto manifest = space.manifest_indices();
  std::vector<char> on(space.n_features, 0);
  for (auto i : x.indices) on[i] = 1;

  while (r.enabled_features.size() < cfg.max_iterations) {
    auto delta0 = malware_probability_delta0(m, r.perturbed);
    bool found = false;
    FeatureIndex best = 0;
    double best_g = std::numeric_limits<double>::infinity();
    for (auto k : manifest) {
      if (on[k]) continue;
      double g = input_gradient_at(m, delta0, k);
      if (!found || g < best_g) {
        found = true;
        best = k;
        best_g = g;
      }
    }
    if (!found) {
      r.stop = StopReason::no_candidates;
      break;
    }
    if (cfg.require_negative_gradient && !(best_g < 0.0)) {
      r.stop = StopReason::no_negative_gradient;
      break;
    }
    on[best] = 1;
    r.perturbed = r.perturbed.with(best);
    r.enabled_features.push_back(best);
    if (predict(m, r.perturbed) == Label::benign) {
      r.stop = StopReason::success;
      break;
    }
  }
  r.iterations_used = r.enabled_features.size();
  r.success = predict(m, r.perturbed) == Label::benign;
  if (r.success) r.stop = StopReason::success;
  return r;
}

struct AttackRecord {
  std::size_t sample_id = 0;  // position in the attacked list
  AttackResult result;
};

struct AttackSummary {
  double rate = 0.0;
  std::size_t detected = 0;   // denominator: malware predicted malware
  std::size_t successes = 0;
  bool empty_denominator = false;
  std::vector<AttackRecord> records;

  // One line per attacked sample: sample <id> success <0|1> iters <k>
  // added <idx,...>; "-" stands for an empty list.
  std::string report() const {
    std::ostringstream os;
    for (const auto& rec : records) {
      os << "sample " << rec.sample_id << " success "
         << (rec.result.success ? 1 : 0) << " iters "
         << rec.result.iterations_used << " added ";
      if (rec.result.enabled_features.empty()) os << '-';
      for (std::size_t i = 0; i < rec.result.enabled_features.size(); ++i)
        os << (i ? "," : "") << rec.result.enabled_features[i];
      os << '\n';
    }
    return os.str();
  }
};

// Attacks every sample of `malware` that the model currently detects.
// The rate is successes / detected, or 0 with empty_denominator set.
inline AttackSummary misclassification_rate(const ModelParams& m,
                                            std::span<const Sample> malware,
                                            const FeatureSpace& space,
                                            const AttackConfig& cfg) {
  cfg.validate();
  check_model_space(m, space);
  AttackSummary s;
  for (std::size_t i = 0; i < malware.size(); ++i) {
    const auto& x = malware[i];
    if (x.label != Label::malware)
      throw ParameterError("misclassification_rate expects malware samples");
    if (predict(m, x) != Label::malware) continue;
    ++s.detected;
    auto r = craft(m, x, space, cfg);
    s.successes += r.success;
    s.records.push_back({i, std::move(r)});
  }
  s.empty_denominator = s.detected == 0;
  s.rate = s.empty_denominator ? 0.0
                               : static_cast<double>(s.successes) /
                                     static_cast<double>(s.detected);
  return s;
}

struct TransferSummary {
  double rate = 0.0;
  std::size_t crafted = 0;      // successful perturbations on the source
  std::size_t transferred = 0;  // of those, classified benign by the target
  bool empty_denominator = false;
};

// Crafts on `source`; returns the fraction of its successful adversarial
// samples that `target` also classifies benign.
inline TransferSummary transfer_rate(const ModelParams& source,
                                     const ModelParams& target,
                                     std::span<const Sample> malware,
                                     const FeatureSpace& space,
                                     const AttackConfig& cfg) {
  check_model_space(source, space);
  check_model_space(target, space);
  if (source.feature_space_id != target.feature_space_id)
    throw ParameterError("source and target models use different feature spaces");
  auto direct = misclassification_rate(source, malware, space, cfg);
  TransferSummary t;
  for (const auto& rec : direct.records) {
    if (!rec.result.success) continue;
    ++t.crafted;
    t.transferred += predict(target, rec.result.perturbed) == Label::benign;
  }
  t.empty_denominator = t.crafted == 0;
  t.rate = t.empty_denominator ? 0.0
                               : static_cast<double>(t.transferred) /
                                     static_cast<double>(t.crafted);
  return t;
}

}  // namespace monoguard

#endif  // MONOGUARD_ATTACK_HPP_
