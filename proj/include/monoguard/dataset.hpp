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

// Sparse boolean-feature corpora: the feature space (which features an
// attacker may enable), samples, the planted-rule synthetic generator, the
// stratified splitter, ratio-controlled batch sampling and the text formats.

#ifndef MONOGUARD_DATASET_HPP_
#define MONOGUARD_DATASET_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "monoguard/errors.hpp"
#include "monoguard/text.hpp"

namespace monoguard {

using FeatureIndex = std::uint32_t;
using Rng = std::mt19937_64;

enum class Label : std::uint8_t { benign = 0, malware = 1 };

inline const char* to_string(Label l) {
  return l == Label::malware ? "malware" : "benign";
}

// Feature count plus the manifest tag. Manifest features are the ones an
// attacker may switch on; everything else is a code (runtime) feature.
struct FeatureSpace {
  std::size_t n_features = 0;
  std::vector<bool> manifest_mask;

  static FeatureSpace with_manifest(std::size_t n,
                                    std::span<const FeatureIndex> manifest) {
    FeatureSpace fs{n, std::vector<bool>(n, false)};
    for (auto i : manifest) {
      if (i >= n) throw ParameterError("manifest index out of range");
      fs.manifest_mask[i] = true;
    }
    fs.validate();
    return fs;
  }

  void validate() const {
    if (n_features == 0) throw ParameterError("feature space is empty");
    if (manifest_mask.size() != n_features)
      throw ParameterError("manifest mask length differs from n_features");
    if (std::find(manifest_mask.begin(), manifest_mask.end(), true) ==
        manifest_mask.end())
      throw ParameterError("feature space has no manifest feature");
  }

  bool is_manifest(FeatureIndex i) const { return manifest_mask[i]; }

  std::vector<FeatureIndex> manifest_indices() const {
    std::vector<FeatureIndex> out;
    for (std::size_t i = 0; i < n_features; ++i)
      if (manifest_mask[i]) out.push_back(static_cast<FeatureIndex>(i));
    return out;
  }

  // Binds serialized models to the space they were trained on.
  std::uint64_t checksum() const {
    text::Fnv1a h;
    h.update_u64(n_features);
    for (std::size_t i = 0; i < n_features; ++i)
      if (manifest_mask[i]) h.update_u64(i);
    return h.value();
  }

  bool operator==(const FeatureSpace&) const = default;
};

// Enabled feature positions, strictly increasing.
struct Sample {
  std::vector<FeatureIndex> indices;
  Label label = Label::benign;

  bool has(FeatureIndex i) const {
    return std::binary_search(indices.begin(), indices.end(), i);
  }

  // Returns a copy with `i` switched on (no-op if already on).
  Sample with(FeatureIndex i) const {
    Sample s = *this;
    auto it = std::lower_bound(s.indices.begin(), s.indices.end(), i);
    if (it == s.indices.end() || *it != i) s.indices.insert(it, i);
    return s;
  }

  bool operator==(const Sample&) const = default;
};

enum class SplitTag { train, test, unsplit };

struct Dataset {
  FeatureSpace space;
  std::vector<Sample> samples;
  SplitTag split_tag = SplitTag::unsplit;

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(),
                      [l](const Sample& s) { return s.label == l; }));
  }

  std::vector<Sample> of_label(Label l) const {
    std::vector<Sample> out;
    for (const auto& s : samples)
      if (s.label == l) out.push_back(s);
    return out;
  }

  double mean_density() const {
    if (samples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : samples) total += static_cast<double>(s.indices.size());
    return total / static_cast<double>(samples.size());
  }

  // Throws unless every sample is canonical and inside the space.
  void validate() const {
    space.validate();
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& idx = samples[k].indices;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= space.n_features)
          throw ParameterError("sample " + std::to_string(k) +
                               ": index out of range");
        if (j > 0 && idx[j] <= idx[j - 1])
          throw ParameterError("sample " + std::to_string(k) +
                               ": indices not strictly increasing");
      }
    }
  }

  // The split tag is bookkeeping and does not take part in equality.
  bool operator==(const Dataset& o) const {
    return space == o.space && samples == o.samples;
  }
};

// Parameters of the planted-rule generator. Defaults are the desk-scale
// corpus: 5,000 features (55% manifest), 20,000 samples, 8% malware,
// 48 enabled features per sample on average and 40 planted rules.
struct SynthSpec {
  std::size_t n_features = 5000;
  double manifest_fraction = 0.55;
  std::size_t n_samples = 20000;
  double malware_fraction = 0.08;
  double mean_density = 48.0;
  std::size_t n_rules = 40;
  std::uint64_t seed = 1;

  std::size_t manifest_count() const {
    auto m = static_cast<std::size_t>(
        std::llround(static_cast<double>(n_features) * manifest_fraction));
    return std::clamp<std::size_t>(m, 1, n_features);
  }

  std::size_t malware_count() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(n_samples) * malware_fraction));
  }

  void validate() const {
    auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
    if (n_features == 0) throw ParameterError("n_features must be positive");
    if (n_samples == 0) throw ParameterError("n_samples must be positive");
    if (!in_open_unit(manifest_fraction))
      throw ParameterError("manifest_fraction must lie in (0,1)");
    if (!in_open_unit(malware_fraction))
      throw ParameterError("malware_fraction must lie in (0,1)");
    if (!(mean_density > 0.0) ||
        !(mean_density < static_cast<double>(n_features)))
      throw ParameterError("mean_density must lie in (0, n_features)");
    if (3 * n_rules > n_features || n_rules > manifest_count())
      throw ParameterError("too many planted rules for the feature space");
  }
};

namespace detail {

// Generator knobs that are not part of SynthSpec.
inline constexpr double kZipfExponent = 0.9;
inline constexpr double kTiltedShare = 0.15;   // per class, of background features
inline constexpr double kTiltMin = 1.0;        // log-weight boost range
inline constexpr double kTiltMax = 2.5;
inline constexpr double kMalwareRuleProb = 0.8;
inline constexpr double kSecondRuleProb = 0.5;
inline constexpr double kBenignRuleProb = 0.35;

}  // namespace detail

// Malware-enriched pattern (indicator_a and indicator_b and not exculpating).
struct PlantedRule {
  FeatureIndex indicator_a = 0, indicator_b = 0, exculpating = 0;
};

struct SyntheticCorpus {
  Dataset data;
  std::vector<PlantedRule> rules;
};

// Planted-rule corpus. Background features follow a Zipf popularity with a
// class-dependent tilt; each rule adds (A and B and not C) to malware and
// (A and B and C) to benign samples, with C always a manifest feature, so a
// learner profits from a negative weight on C. Pure function of `spec`.
inline SyntheticCorpus generate_synthetic_corpus(const SynthSpec& spec) {
  using namespace detail;
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.n_features;

  std::vector<FeatureIndex> perm(n);
  std::iota(perm.begin(), perm.end(), FeatureIndex{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t n_manifest = spec.manifest_count();
  std::vector<FeatureIndex> manifest(perm.begin(), perm.begin() + n_manifest);
  std::sort(manifest.begin(), manifest.end());
  Dataset d;
  d.space = FeatureSpace::with_manifest(n, manifest);

  // Rules: exculpating features from the manifest side, indicators anywhere.
  std::vector<bool> reserved(n, false);
  std::vector<PlantedRule> rules;
  {
    std::vector<FeatureIndex> m_pool = manifest;
    std::shuffle(m_pool.begin(), m_pool.end(), rng);
    for (std::size_t r = 0; r < spec.n_rules; ++r) {
      rules.push_back({0, 0, m_pool[r]});
      reserved[m_pool[r]] = true;
    }
    std::vector<FeatureIndex> rest;
    for (std::size_t i = 0; i < n; ++i)
      if (!reserved[i]) rest.push_back(static_cast<FeatureIndex>(i));
    std::shuffle(rest.begin(), rest.end(), rng);
    for (std::size_t r = 0; r < spec.n_rules; ++r) {
      rules[r].indicator_a = rest[2 * r];
      rules[r].indicator_b = rest[2 * r + 1];
      reserved[rest[2 * r]] = reserved[rest[2 * r + 1]] = true;
    }
  }

  // Background popularity per class.
  std::vector<double> w_benign(n, 0.0), w_malware(n, 0.0);
  std::size_t n_background = 0;
  {
    std::vector<FeatureIndex> rank(n);
    std::iota(rank.begin(), rank.end(), FeatureIndex{0});
    std::shuffle(rank.begin(), rank.end(), rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> tilt(kTiltMin, kTiltMax);
    for (std::size_t r = 0; r < n; ++r) {
      FeatureIndex f = rank[r];
      double u = unit(rng);
      double boost = std::exp(tilt(rng));
      if (reserved[f]) continue;
      ++n_background;
      double base = std::pow(static_cast<double>(r + 1), -kZipfExponent);
      w_benign[f] = w_malware[f] = base;
      if (u < kTiltedShare)
        w_malware[f] *= boost;
      else if (u < 2 * kTiltedShare)
        w_benign[f] *= boost;
    }
  }

  const bool have_rules = !rules.empty() && n_background > 0;
  const double rule_feats_malware =
      have_rules ? kMalwareRuleProb * (1.0 + kSecondRuleProb) * 2.0 : 0.0;
  const double rule_feats_benign = have_rules ? kBenignRuleProb * 3.0 : 0.0;
  auto lambda_for = [&](double planted) {
    return std::max(spec.mean_density - planted, 0.0);
  };

  std::vector<Label> labels(spec.n_samples, Label::benign);
  std::fill_n(labels.begin(), spec.malware_count(), Label::malware);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::discrete_distribution<FeatureIndex> draw_benign(w_benign.begin(),
                                                       w_benign.end());
  std::discrete_distribution<FeatureIndex> draw_malware(w_malware.begin(),
                                                        w_malware.end());
  std::poisson_distribution<std::size_t> count_benign(
      std::max(lambda_for(rule_feats_benign), 1e-9));
  std::poisson_distribution<std::size_t> count_malware(
      std::max(lambda_for(rule_feats_malware), 1e-9));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_rule(
      0, rules.empty() ? 0 : rules.size() - 1);

  std::vector<char> on(n, 0);
  d.samples.reserve(spec.n_samples);
  for (Label label : labels) {
    const bool mal = label == Label::malware;
    std::vector<FeatureIndex> idx;
    auto enable = [&](FeatureIndex f) {
      if (!on[f]) {
        on[f] = 1;
        idx.push_back(f);
      }
    };
    std::size_t k = mal ? count_malware(rng) : count_benign(rng);
    k = std::min(k, n_background);
    auto& draw = mal ? draw_malware : draw_benign;
    // Rejection for duplicates; bounded so dense tiny spaces terminate.
    std::size_t attempts = 0;
    while (idx.size() < k && attempts < 50 * k + 100) {
      enable(draw(rng));
      ++attempts;
    }
    if (have_rules) {
      if (mal) {
        if (unit(rng) < kMalwareRuleProb) {
          int n_r = unit(rng) < kSecondRuleProb ? 2 : 1;
          std::vector<FeatureIndex> excluded;
          for (int t = 0; t < n_r; ++t) {
            const auto& r = rules[pick_rule(rng)];
            enable(r.indicator_a);
            enable(r.indicator_b);
            excluded.push_back(r.exculpating);
          }
          for (auto c : excluded) {
            if (on[c]) {
              on[c] = 0;
              idx.erase(std::find(idx.begin(), idx.end(), c));
            }
          }
        }
      } else if (unit(rng) < kBenignRuleProb) {
        const auto& r = rules[pick_rule(rng)];
        enable(r.indicator_a);
        enable(r.indicator_b);
        enable(r.exculpating);
      }
    }
    for (auto f : idx) on[f] = 0;
    std::sort(idx.begin(), idx.end());
    d.samples.push_back(Sample{std::move(idx), label});
  }
  return {std::move(d), std::move(rules)};
}

inline Dataset generate_synthetic(const SynthSpec& spec) {
  return generate_synthetic_corpus(spec).data;
}

// Stratified split. Each label contributes round(count * test_fraction)
// samples to the test side; both sides keep the parent's sample order.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction,
                                         std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ParameterError("test_fraction must lie in (0,1)");
  Rng rng(seed);
  std::vector<bool> to_test(d.samples.size(), false);
  for (Label l : {Label::benign, Label::malware}) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < d.samples.size(); ++i)
      if (d.samples[i].label == l) pos.push_back(i);
    auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(pos.size()) * test_fraction));
    if (n_test == 0 || n_test == pos.size())
      throw SplitError(std::string("split leaves a side without ") +
                       to_string(l) + " samples");
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t j = 0; j < n_test; ++j) to_test[pos[j]] = true;
  }
  Dataset train{d.space, {}, SplitTag::train};
  Dataset test{d.space, {}, SplitTag::test};
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    (to_test[i] ? test : train).samples.push_back(d.samples[i]);
  return {std::move(train), std::move(test)};
}

// Positions into d.samples for one mini-batch with exactly
// round(batch_size * malware_ratio) malware entries. A class is drawn without
// replacement when its pool is large enough, with replacement otherwise.
// The batch order is shuffled.
inline std::vector<std::size_t> sample_batch_indices(const Dataset& d,
                                                     std::size_t batch_size,
                                                     double malware_ratio,
                                                     Rng& rng) {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (!(malware_ratio >= 0.0 && malware_ratio <= 1.0))
    throw ParameterError("malware_ratio must lie in [0,1]");
  std::vector<std::size_t> mal, ben;
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    (d.samples[i].label == Label::malware ? mal : ben).push_back(i);
  if (mal.empty() || ben.empty())
    throw ParameterError("batch sampling needs both labels in the dataset");

  auto n_mal = static_cast<std::size_t>(
      std::llround(static_cast<double>(batch_size) * malware_ratio));
  std::size_t n_ben = batch_size - n_mal;
  std::vector<std::size_t> batch;
  batch.reserve(batch_size);
  auto draw = [&](const std::vector<std::size_t>& pool, std::size_t k) {
    if (k <= pool.size()) {
      std::sample(pool.begin(), pool.end(), std::back_inserter(batch), k, rng);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t j = 0; j < k; ++j) batch.push_back(pool[pick(rng)]);
    }
  };
  draw(mal, n_mal);
  draw(ben, n_ben);
  std::shuffle(batch.begin(), batch.end(), rng);
  return batch;
}

inline std::vector<Sample> sample_batch(const Dataset& d, std::size_t batch_size,
                                        double malware_ratio, Rng& rng) {
  std::vector<Sample> out;
  for (auto i : sample_batch_indices(d, batch_size, malware_ratio, rng))
    out.push_back(d.samples[i]);
  return out;
}

// --- Text formats ----------------------------------------------------------

inline void write_feature_space(std::ostream& os, const FeatureSpace& fs) {
  os << "n_features " << fs.n_features << '\n';
  for (std::size_t i = 0; i < fs.n_features; ++i)
    if (fs.manifest_mask[i]) os << "manifest " << i << '\n';
}

inline FeatureSpace read_feature_space(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> FormatError {
    return FormatError("feature space line " + std::to_string(line_no) + ": " +
                       msg);
  };
  FeatureSpace fs;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    auto fields = text::split(text::trim(line), ' ');
    if (fields.size() != 2) throw fail("expected two fields");
    auto value = text::parse_u64(fields[1]);
    if (!value) throw fail("bad integer '" + std::string(fields[1]) + "'");
    if (!have_header) {
      if (fields[0] != "n_features") throw fail("expected n_features header");
      if (*value == 0) throw fail("n_features must be positive");
      fs.n_features = *value;
      fs.manifest_mask.assign(fs.n_features, false);
      have_header = true;
      continue;
    }
    if (fields[0] != "manifest")
      throw fail("unknown token '" + std::string(fields[0]) + "'");
    if (*value >= fs.n_features) throw fail("manifest index out of range");
    fs.manifest_mask[*value] = true;
  }
  if (!have_header) throw FormatError("feature space file is empty");
  try {
    fs.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("feature space: ") + e.what());
  }
  return fs;
}

inline void write_samples(std::ostream& os, const Dataset& d) {
  for (const auto& s : d.samples) {
    os << to_string(s.label);
    for (auto i : s.indices) os << ' ' << i;
    os << '\n';
  }
}

inline Dataset read_samples(std::istream& is, const FeatureSpace& fs) {
  Dataset d{fs, {}, SplitTag::unsplit};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    auto fail = [&](const std::string& msg) {
      return FormatError("dataset line " + std::to_string(line_no) + ": " +
                         msg);
    };
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = text::split(line, ' ');
    Sample s;
    if (fields[0] == "malware")
      s.label = Label::malware;
    else if (fields[0] == "benign")
      s.label = Label::benign;
    else
      throw fail("unknown label '" + std::string(fields[0]) + "'");
    for (std::size_t j = 1; j < fields.size(); ++j) {
      auto v = text::parse_u64(fields[j]);
      if (!v) throw fail("bad index '" + std::string(fields[j]) + "'");
      if (*v >= fs.n_features)
        throw fail("index " + std::to_string(*v) + " out of range");
      if (!s.indices.empty() && *v <= s.indices.back())
        throw fail("indices not strictly increasing");
      s.indices.push_back(static_cast<FeatureIndex>(*v));
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

inline FeatureSpace load_feature_space(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open feature space file " + path);
  return read_feature_space(is);
}

inline Dataset load_dataset(const std::string& path, const FeatureSpace& fs) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open dataset file " + path);
  return read_samples(is, fs);
}

inline void save_feature_space(const FeatureSpace& fs, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  write_feature_space(os, fs);
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path);
  write_samples(os, d);
}

}  // namespace monoguard

#endif  // MONOGUARD_DATASET_HPP_
