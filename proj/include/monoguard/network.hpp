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

// Two-hidden-layer MLP over sparse binary inputs: forward/backward passes by
// hand, sigmoid or temperature-softmax head, inverted dropout, Glorot
// initialisation and the versioned text model format.

#ifndef MONOGUARD_NETWORK_HPP_
#define MONOGUARD_NETWORK_HPP_

#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "monoguard/dataset.hpp"
#include "monoguard/errors.hpp"
#include "monoguard/text.hpp"

namespace monoguard {

enum class Activation { relu, identity };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::relu;
  bool operator==(const LayerSpec&) const = default;
};

enum class HeadVariant { sigmoid_single, softmax_pair };

// Output unit order for softmax_pair is (benign, malware).
struct HeadKind {
  HeadVariant variant = HeadVariant::softmax_pair;
  double temperature = 1.0;

  std::size_t outputs() const {
    return variant == HeadVariant::sigmoid_single ? 1 : 2;
  }
  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw ParameterError("head temperature must be positive and finite");
  }
  bool operator==(const HeadKind&) const = default;
};

inline const char* to_string(HeadVariant v) {
  return v == HeadVariant::sigmoid_single ? "sigmoid_single" : "softmax_pair";
}

inline const char* to_string(Activation a) {
  return a == Activation::relu ? "relu" : "identity";
}

// Dense row-major weights: weights[i * out_dim + j] connects input i to
// output j.
struct Layer {
  LayerSpec spec;
  std::vector<double> weights;
  std::vector<double> bias;

  double weight(std::size_t i, std::size_t j) const {
    return weights[i * spec.out_dim + j];
  }
  std::span<const double> row(std::size_t i) const {
    return {weights.data() + i * spec.out_dim, spec.out_dim};
  }
  bool operator==(const Layer&) const = default;
};

struct ModelParams {
  std::vector<Layer> layers;
  HeadKind head;
  std::uint64_t feature_space_id = 0;

  std::size_t n_features() const {
    return layers.empty() ? 0 : layers.front().spec.in_dim;
  }

  void validate() const {
    head.validate();
    if (layers.empty()) throw ConstructionError("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.spec.in_dim == 0 || L.spec.out_dim == 0)
        throw ConstructionError("layer " + std::to_string(l) + " has a zero dim");
      if (l > 0 && L.spec.in_dim != layers[l - 1].spec.out_dim)
        throw ConstructionError("layer " + std::to_string(l) +
                                " does not chain with its predecessor");
      if (L.weights.size() != L.spec.in_dim * L.spec.out_dim ||
          L.bias.size() != L.spec.out_dim)
        throw ConstructionError("layer " + std::to_string(l) +
                                " storage does not match its dims");
      for (double w : L.weights)
        if (!std::isfinite(w)) throw ConstructionError("non-finite weight");
      for (double b : L.bias)
        if (!std::isfinite(b)) throw ConstructionError("non-finite bias");
    }
    if (layers.back().spec.out_dim != head.outputs())
      throw ConstructionError("last layer width does not match the head");
  }

  bool operator==(const ModelParams&) const = default;
};

// Hidden widths plus head; expands to LayerSpecs once n_features is known.
struct Architecture {
  std::vector<std::size_t> hidden{200, 200};
  HeadKind head;

  std::vector<LayerSpec> layers(std::size_t n_features) const {
    std::vector<LayerSpec> out;
    std::size_t in = n_features;
    for (auto h : hidden) {
      out.push_back({in, h, Activation::relu});
      in = h;
    }
    out.push_back({in, head.outputs(), Activation::identity});
    return out;
  }
};

enum class InitVariant { glorot_normal, abs_glorot_normal };

struct InitMode {
  InitVariant variant = InitVariant::glorot_normal;
  std::uint64_t seed = 0;
};

// Weights ~ N(0, 2 / (fan_in + fan_out)); abs_glorot_normal folds them onto
// the non-negative half-line. Biases start at zero.
inline ModelParams init(std::span<const LayerSpec> arch, const HeadKind& head,
                        const InitMode& mode,
                        std::uint64_t feature_space_id = 0) {
  head.validate();
  if (arch.empty()) throw ConstructionError("architecture has no layers");
  ModelParams m;
  m.head = head;
  m.feature_space_id = feature_space_id;
  Rng rng(mode.seed);
  for (std::size_t l = 0; l < arch.size(); ++l) {
    const auto& s = arch[l];
    if (s.in_dim == 0 || s.out_dim == 0)
      throw ConstructionError("layer " + std::to_string(l) + " has a zero dim");
    if (l > 0 && s.in_dim != arch[l - 1].out_dim)
      throw ConstructionError("layer " + std::to_string(l) +
                              " does not chain with its predecessor");
    Layer L{s, std::vector<double>(s.in_dim * s.out_dim),
            std::vector<double>(s.out_dim, 0.0)};
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(s.in_dim + s.out_dim)));
    for (auto& w : L.weights) {
      w = normal(rng);
      if (mode.variant == InitVariant::abs_glorot_normal) w = std::fabs(w);
    }
    m.layers.push_back(std::move(L));
  }
  if (m.layers.back().spec.out_dim != head.outputs())
    throw ConstructionError("last layer width does not match the head");
  return m;
}

// --- numerics --------------------------------------------------------------

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

// --- forward ---------------------------------------------------------------

struct DropoutSpec {
  double rate = 0.5;
  Rng* rng = nullptr;
};

struct ForwardTrace {
  std::vector<FeatureIndex> input;
  std::vector<std::vector<double>> pre;    // per layer, before activation
  std::vector<std::vector<double>> post;   // per layer, after activation/dropout
  std::vector<std::vector<double>> keep;   // per hidden layer dropout scale; empty in inference
  std::vector<double> probs;               // (p_benign, p_malware)
  double temperature = 1.0;                // softmax temperature used for probs

  std::span<const double> logits() const { return pre.back(); }
  double p_malware() const { return probs[1]; }
};

// Inference when `dropout` is empty. `temperature` overrides the head's
// training temperature for softmax heads (sigmoid heads ignore it).
inline ForwardTrace forward(const ModelParams& m,
                            std::span<const FeatureIndex> x,
                            std::optional<DropoutSpec> dropout = std::nullopt,
                            std::optional<double> temperature = std::nullopt) {
  ForwardTrace t;
  t.input.assign(x.begin(), x.end());
  const std::size_t n_layers = m.layers.size();
  t.pre.resize(n_layers);
  t.post.resize(n_layers);
  if (dropout) {
    if (!(dropout->rate >= 0.0 && dropout->rate < 1.0) || !dropout->rng)
      throw ParameterError("dropout rate must lie in [0,1) with an rng");
    t.keep.resize(n_layers - 1);
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& L = m.layers[l];
    const std::size_t out = L.spec.out_dim;
    std::vector<double> z(L.bias);
    if (l == 0) {
      for (auto k : x) {
        const double* w = L.weights.data() + std::size_t{k} * out;
        for (std::size_t j = 0; j < out; ++j) z[j] += w[j];
      }
    } else {
      const auto& a = t.post[l - 1];
      for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        const double* w = L.weights.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) z[j] += ai * w[j];
      }
    }
    std::vector<double> a(z);
    if (L.spec.activation == Activation::relu)
      for (auto& v : a) v = v > 0.0 ? v : 0.0;
    if (dropout && l + 1 < n_layers) {
      std::bernoulli_distribution drop(dropout->rate);
      const double scale = 1.0 / (1.0 - dropout->rate);
      auto& keep = t.keep[l];
      keep.resize(out);
      for (std::size_t j = 0; j < out; ++j) {
        keep[j] = drop(*dropout->rng) ? 0.0 : scale;
        a[j] *= keep[j];
      }
    }
    t.pre[l] = std::move(z);
    t.post[l] = std::move(a);
  }
  const auto& z = t.pre.back();
  if (m.head.variant == HeadVariant::sigmoid_single) {
    t.temperature = 1.0;
    t.probs = {sigmoid(-z[0]), sigmoid(z[0])};
  } else {
    t.temperature = temperature.value_or(m.head.temperature);
    const double gap = (z[1] - z[0]) / t.temperature;
    t.probs = {sigmoid(-gap), sigmoid(gap)};
  }
  return t;
}

inline ForwardTrace forward(const ModelParams& m, const Sample& x,
                            std::optional<DropoutSpec> dropout = std::nullopt,
                            std::optional<double> temperature = std::nullopt) {
  return forward(m, std::span<const FeatureIndex>(x.indices), dropout,
                 temperature);
}

// Deployment score: malware probability at temperature 1, no dropout.
inline double malware_probability(const ModelParams& m, const Sample& x) {
  return forward(m, x, std::nullopt, 1.0).p_malware();
}

// p_malware >= 0.5 is malware; an exact tie is classified malware.
inline Label predict(const ModelParams& m, const Sample& x) {
  return malware_probability(m, x) >= 0.5 ? Label::malware : Label::benign;
}

// --- loss ------------------------------------------------------------------

// Training target as a (benign, malware) distribution.
struct Target {
  double p_benign = 1.0;
  double p_malware = 0.0;

  static Target hard(Label l) {
    return l == Label::malware ? Target{0.0, 1.0} : Target{1.0, 0.0};
  }
  void validate() const {
    if (!(p_benign >= 0.0) || !(p_malware >= 0.0) ||
        std::fabs(p_benign + p_malware - 1.0) > 1e-9)
      throw ParameterError("target is not a probability distribution");
  }
};

// Cross-entropy of `logits` against `target`. Sigmoid heads use binary
// cross-entropy on the single logit; softmax heads divide the logits by
// `temperature` first.
inline double cross_entropy(std::span<const double> logits, const Target& target,
                            const HeadKind& head, double temperature) {
  target.validate();
  if (head.variant == HeadVariant::sigmoid_single) {
    const double z = logits[0];
    return target.p_malware * softplus(-z) + target.p_benign * softplus(z);
  }
  const double gap = (logits[1] - logits[0]) / temperature;
  // -log q_malware = softplus(-gap), -log q_benign = softplus(gap)
  return target.p_malware * softplus(-gap) + target.p_benign * softplus(gap);
}

inline double cross_entropy(const ForwardTrace& t, const Target& target,
                            const HeadKind& head) {
  return cross_entropy(t.logits(), target, head, t.temperature);
}

// dLoss/dlogits for cross_entropy.
inline std::vector<double> cross_entropy_grad(const ForwardTrace& t,
                                              const Target& target,
                                              const HeadKind& head) {
  target.validate();
  if (head.variant == HeadVariant::sigmoid_single)
    return {t.probs[1] - target.p_malware};
  return {(t.probs[0] - target.p_benign) / t.temperature,
          (t.probs[1] - target.p_malware) / t.temperature};
}

// --- backward --------------------------------------------------------------

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

struct Gradients {
  std::vector<LayerGradient> layers;
  std::vector<double> input;  // dense over features; empty unless requested

  static Gradients zeros_like(const ModelParams& m) {
    Gradients g;
    for (const auto& L : m.layers)
      g.layers.push_back({std::vector<double>(L.weights.size(), 0.0),
                          std::vector<double>(L.bias.size(), 0.0)});
    return g;
  }

  void add(const Gradients& o, double scale = 1.0) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l].weights.size(); ++i)
        layers[l].weights[i] += scale * o.layers[l].weights[i];
      for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
        layers[l].bias[i] += scale * o.layers[l].bias[i];
    }
  }

  void set_zero() {
    for (auto& L : layers) {
      std::fill(L.weights.begin(), L.weights.end(), 0.0);
      std::fill(L.bias.begin(), L.bias.end(), 0.0);
    }
    std::fill(input.begin(), input.end(), 0.0);
  }
};

// Extra gradient injected mid-network by activation-site penalties.
// preact[l] is added to dL/d(pre of hidden layer l); layer_input[l] (l >= 1)
// is added to dL/d(input of layer l), i.e. the post-dropout activations of
// layer l-1. Either may be left empty.
struct InjectedGradients {
  std::vector<std::vector<double>> preact;
  std::vector<std::vector<double>> layer_input;
};

enum class InputGradient { none, dense };

// Backpropagates dL/dlogits through the trace. Parameter gradients are
// accumulated into `acc` scaled by `scale`; the first layer only touches the
// rows of enabled features. Returns dL/d(pre-activation of layer 0) so
// callers can form input gradients for any feature subset.
inline std::vector<double> backprop(const ModelParams& m, const ForwardTrace& t,
                                    std::span<const double> dlogits,
                                    Gradients* acc, double scale = 1.0,
                                    const InjectedGradients* inject = nullptr) {
  const std::size_t n_layers = m.layers.size();
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& L = m.layers[l];
    const std::size_t out = L.spec.out_dim;
    if (inject && l + 1 < n_layers && l < inject->preact.size() &&
        !inject->preact[l].empty())
      for (std::size_t j = 0; j < out; ++j) delta[j] += inject->preact[l][j];
    if (acc) {
      auto& G = acc->layers[l];
      for (std::size_t j = 0; j < out; ++j) G.bias[j] += scale * delta[j];
      if (l == 0) {
        for (auto k : t.input) {
          double* g = G.weights.data() + std::size_t{k} * out;
          for (std::size_t j = 0; j < out; ++j) g[j] += scale * delta[j];
        }
      } else {
        const auto& a = t.post[l - 1];
        for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
          const double ai = a[i] * scale;
          if (ai == 0.0) continue;
          double* g = G.weights.data() + i * out;
          for (std::size_t j = 0; j < out; ++j) g[j] += ai * delta[j];
        }
      }
    }
    if (l == 0) break;
    // dL/d(post of layer l-1)
    std::vector<double> dpost(L.spec.in_dim, 0.0);
    for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
      const double* w = L.weights.data() + i * out;
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += w[j] * delta[j];
      dpost[i] = s;
    }
    if (inject && l < inject->layer_input.size() &&
        !inject->layer_input[l].empty())
      for (std::size_t i = 0; i < dpost.size(); ++i)
        dpost[i] += inject->layer_input[l][i];
    const auto& prev = m.layers[l - 1];
    const auto& z = t.pre[l - 1];
    for (std::size_t i = 0; i < dpost.size(); ++i) {
      double d = dpost[i];
      if (!t.keep.empty()) d *= t.keep[l - 1][i];
      if (prev.spec.activation == Activation::relu && !(z[i] > 0.0)) d = 0.0;
      dpost[i] = d;
    }
    delta = std::move(dpost);
  }
  return delta;
}

// Input gradient for one feature given dL/d(pre of layer 0).
inline double input_gradient_at(const ModelParams& m,
                                std::span<const double> delta0,
                                FeatureIndex k) {
  auto row = m.layers.front().row(k);
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * delta0[j];
  return s;
}

// Exact cross-entropy gradients with respect to every weight, bias and,
// when requested, every input feature.
inline Gradients backward(const ModelParams& m, const ForwardTrace& t,
                          const Target& target,
                          InputGradient input = InputGradient::dense) {
  Gradients g = Gradients::zeros_like(m);
  auto dz = cross_entropy_grad(t, target, m.head);
  auto delta0 = backprop(m, t, dz, &g);
  if (input == InputGradient::dense) {
    g.input.resize(m.n_features());
    for (std::size_t k = 0; k < g.input.size(); ++k)
      g.input[k] = input_gradient_at(m, delta0, static_cast<FeatureIndex>(k));
  }
  return g;
}

// dp_malware/dlogits at the trace's temperature, using the probability
// Jacobian p(1-p). Saturated outputs (p rounded to 0 or 1) give exactly zero.
inline std::vector<double> malware_probability_grad(const ForwardTrace& t,
                                                    const HeadKind& head) {
  const double p = t.probs[1];
  const double s = p * (1.0 - p);
  if (head.variant == HeadVariant::sigmoid_single) return {s};
  return {-s / t.temperature, s / t.temperature};
}

// dL/d(pre of layer 0) for L = p_malware at temperature 1 on input x.
inline std::vector<double> malware_probability_delta0(const ModelParams& m,
                                                      const Sample& x) {
  auto t = forward(m, x, std::nullopt, 1.0);
  auto dz = malware_probability_grad(t, m.head);
  return backprop(m, t, dz, nullptr);
}

// --- serialization ---------------------------------------------------------

inline std::string serialize(const ModelParams& m) {
  std::ostringstream os;
  os << "mgmodel v1 " << to_string(m.head.variant) << ' '
     << text::shortest(m.head.temperature) << ' ' << m.layers.size() << ' '
     << text::hex64(m.feature_space_id) << '\n';
  for (const auto& L : m.layers) {
    os << L.spec.in_dim << ' ' << L.spec.out_dim << ' '
       << to_string(L.spec.activation) << '\n';
    std::string line;
    for (std::size_t i = 0; i < L.spec.in_dim; ++i) {
      line.clear();
      for (std::size_t j = 0; j < L.spec.out_dim; ++j) {
        if (j) line += ' ';
        line += text::precise(L.weight(i, j));
      }
      os << line << '\n';
    }
    line.clear();
    for (std::size_t j = 0; j < L.spec.out_dim; ++j) {
      if (j) line += ' ';
      line += text::precise(L.bias[j]);
    }
    os << line << '\n';
  }
  std::string body = os.str();
  text::Fnv1a h;
  h.update(body);
  body += "checksum " + text::hex64(h.value()) + '\n';
  return body;
}

inline ModelParams deserialize(std::string_view bytes) {
  auto fail = [](const std::string& msg) { return FormatError("model: " + msg); };
  auto trailer = bytes.rfind("checksum ");
  if (trailer == std::string_view::npos) throw fail("missing checksum trailer");
  {
    text::Fnv1a h;
    h.update(bytes.substr(0, trailer));
    auto stored = text::parse_u64(
        text::trim(bytes.substr(trailer + 9)), 16);
    if (!stored || *stored != h.value()) throw fail("checksum mismatch");
  }
  std::string_view body = bytes.substr(0, trailer);
  auto lines = text::split(body, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  std::size_t at = 0;
  auto next = [&]() -> std::string_view {
    if (at >= lines.size()) throw fail("truncated");
    return lines[at++];
  };

  auto header = text::split(next(), ' ');
  if (header.size() != 6 || header[0] != "mgmodel")
    throw fail("bad header");
  if (header[1] != "v1")
    throw fail("unsupported version '" + std::string(header[1]) + "'");
  ModelParams m;
  if (header[2] == "sigmoid_single")
    m.head.variant = HeadVariant::sigmoid_single;
  else if (header[2] == "softmax_pair")
    m.head.variant = HeadVariant::softmax_pair;
  else
    throw fail("unknown head '" + std::string(header[2]) + "'");
  auto temp = text::parse_double(header[3]);
  auto n_layers = text::parse_u64(header[4]);
  auto fs_id = text::parse_u64(header[5], 16);
  if (!temp || !n_layers || !fs_id || *n_layers == 0) throw fail("bad header");
  m.head.temperature = *temp;
  m.feature_space_id = *fs_id;

  auto parse_row = [&](std::string_view line, std::size_t expect,
                       double* dst) {
    auto f = text::split(line, ' ');
    if (f.size() != expect) throw fail("row has wrong width");
    for (std::size_t j = 0; j < expect; ++j) {
      auto v = text::parse_double(f[j]);
      if (!v) throw fail("bad number '" + std::string(f[j]) + "'");
      dst[j] = *v;
    }
  };
  for (std::uint64_t l = 0; l < *n_layers; ++l) {
    auto dims = text::split(next(), ' ');
    if (dims.size() != 3) throw fail("bad layer line");
    auto in = text::parse_u64(dims[0]);
    auto out = text::parse_u64(dims[1]);
    if (!in || !out || *in == 0 || *out == 0) throw fail("bad layer dims");
    Layer L;
    L.spec = {*in, *out, Activation::relu};
    if (dims[2] == "identity")
      L.spec.activation = Activation::identity;
    else if (dims[2] != "relu")
      throw fail("unknown activation");
    L.weights.resize(*in * *out);
    L.bias.resize(*out);
    for (std::size_t i = 0; i < *in; ++i)
      parse_row(next(), *out, L.weights.data() + i * *out);
    parse_row(next(), *out, L.bias.data());
    m.layers.push_back(std::move(L));
  }
  if (at != lines.size()) throw fail("trailing data");
  try {
    m.validate();
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return m;
}

}  // namespace monoguard

#endif  // MONOGUARD_NETWORK_HPP_
