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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "monoguard/constraints.hpp"
#include "monoguard/training.hpp"
#include "test_support.hpp"

namespace monoguard {
namespace {

ConstraintConfig Penalty(double c1, double c2, Placement p = Placement::weights) {
  ConstraintConfig c;
  c.n1_coeff = c1;
  c.n2_coeff = c2;
  c.placement = p;
  return c;
}

TEST(Penalty, Examples) {
  EXPECT_EQ(n1(-0.3), 0.3);
  EXPECT_EQ(n1(0.7), 0.0);
  EXPECT_EQ(n1(0.0), 0.0);
  EXPECT_DOUBLE_EQ(n2(-0.3), 0.09);
  EXPECT_EQ(n2(0.7), 0.0);
  EXPECT_EQ(n1_grad(0.0), 0.0);
  EXPECT_EQ(n1_grad(-2.0), -1.0);
  EXPECT_EQ(n2_grad(-2.0), -4.0);
}

TEST(Penalty, Properties) {
  Rng rng(3);
  std::normal_distribution<double> d(0, 2);
  for (int i = 0; i < 10000; ++i) {
    double x = d(rng), y = d(rng);
    EXPECT_GE(n1(x), 0.0);
    EXPECT_GE(n2(x), 0.0);
    if (x >= 0) {
      EXPECT_EQ(n1(x) + n2(x), 0.0);
    }
    if (x < 0 && y < 0 && x < y) {
      EXPECT_GT(n1(x), n1(y));
      EXPECT_GT(n2(x), n2(y));
    }
  }
}

TEST(WeightPenaltyTest, ExampleMatrix) {
  std::vector<LayerSpec> arch{{2, 2, Activation::identity}};
  auto m = init(arch, {HeadVariant::softmax_pair, 1}, {});
  m.layers[0].weights = {-1, 2, 0.5, -0.5};
  m.layers[0].bias = {-7, -7};
  auto a = weight_penalty(m, Penalty(1, 0));
  EXPECT_DOUBLE_EQ(a.report.total, 1.5);
  auto b = weight_penalty(m, Penalty(0, 1));
  EXPECT_DOUBLE_EQ(b.report.total, 1.25);
  EXPECT_DOUBLE_EQ(b.report.negative_mass, 1.5);
  EXPECT_EQ(b.gradients.layers[0].weights, (std::vector<double>{-2, 0, 0, -1}));
  EXPECT_EQ(b.gradients.layers[0].bias, (std::vector<double>{0, 0}));
  EXPECT_THROW(weight_penalty(m, Penalty(1, 0, Placement::presum)), ParameterError);
}

TEST(WeightPenaltyTest, PermutationInvariant) {
  Rng rng(4);
  auto m = testing::random_net({}, rng);
  auto cfg = Penalty(0.4, 1.3);
  const double before = weight_penalty(m, cfg).report.total;
  for (auto& L : m.layers) std::shuffle(L.weights.begin(), L.weights.end(), rng);
  EXPECT_NEAR(weight_penalty(m, cfg).report.total, before, 1e-12);
}

TEST(WeightPenaltyTest, MatchesNegativeMassAndLayerSum) {
  Rng rng(5);
  auto m = testing::random_net({}, rng);
  auto r = weight_penalty(m, Penalty(1, 0)).report;
  EXPECT_NEAR(r.total, negative_mass(m), 1e-12);
  double s = 0;
  for (double v : r.per_layer) s += v;
  EXPECT_NEAR(s, r.total, 1e-12);
}

TEST(ActivationPenaltyTest, Example) {
  std::vector<LayerSpec> arch{{2, 3, Activation::relu}, {3, 1, Activation::identity}};
  auto m = init(arch, {HeadVariant::sigmoid_single, 1}, {});
  m.layers[0].weights = {-1, 0.5, 0, 0, 0, 0};
  m.layers[0].bias = {0, 0, -0.25};
  auto t = forward(m, Sample{{0}, Label::benign});
  auto p = activation_penalty(t, Penalty(1, 1, Placement::activations));
  EXPECT_DOUBLE_EQ(p.penalty, 1.0 + 1.0 + 0.25 + 0.0625);
  ASSERT_EQ(p.preact_grad.size(), 1u);
  EXPECT_EQ(p.preact_grad[0], (std::vector<double>{-3, 0, -1.5}));
}

TEST(PresumPenaltyTest, DenseExample) {
  std::vector<double> x{1.0, 0.0, 2.0};
  std::vector<double> W{-1, 1, 5, -5, 0.5, -0.25};  // 3x2
  auto p = presum_penalty(x, W, 2, Penalty(1, 0, Placement::presum));
  // products: (-1, 1), (0, 0), (1, -0.5)
  EXPECT_DOUBLE_EQ(p.penalty, 1.5);
  EXPECT_EQ(p.weight_grad, (std::vector<double>{-1, 0, 0, 0, 0, -2}));
  EXPECT_EQ(p.input_grad, (std::vector<double>{1, 0, 0.25}));
  EXPECT_THROW(presum_penalty(x, std::span<const double>(W).first(5), 2, Penalty(1, 0)),
               ParameterError);
}

TEST(PresumPenaltyTest, DenseGradientMatchesFiniteDifferences) {
  Rng rng(6);
  std::normal_distribution<double> d(0, 1);
  auto cfg = Penalty(0.7, 1.9, Placement::presum);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(6), W(6 * 4);
    for (auto& v : x) v = std::fabs(d(rng));
    for (auto& v : W) v = d(rng);
    auto p = presum_penalty(x, W, 4, cfg);
    auto f = [&] {
      testing::OracleEval e;
      for (std::size_t k = 0; k < 6; ++k)
        for (std::size_t j = 0; j < 4; ++j) {
          double prod = x[k] * W[k * 4 + j];
          e.objective += testing::oracle_n(prod, cfg);
          e.kinks.push_back(prod);
        }
      return e;
    };
    for (std::size_t i = 0; i < W.size(); ++i) {
      auto c = testing::fd_check(W[i], p.weight_grad[i], f);
      EXPECT_TRUE(c.skipped || c.ok) << i;
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
      auto c = testing::fd_check(x[k], p.input_grad[k], f);
      EXPECT_TRUE(c.skipped || c.ok) << k;
    }
  }
}

TEST(PenalisedObjective, AllPlacementsMatchFiniteDifferences) {
  Rng rng(7);
  const Placement placements[] = {Placement::weights, Placement::activations,
                                  Placement::presum};
  for (int rep = 0; rep < 9; ++rep) {
    testing::TinyNetSpec spec;
    spec.head = rep % 2 ? HeadKind{HeadVariant::sigmoid_single, 1}
                        : HeadKind{HeadVariant::softmax_pair, 2.0};
    auto m = testing::random_net(spec, rng);
    auto x = testing::random_sample(spec.n_features, 0.35, Label::malware, rng);
    auto cfg = Penalty(0.3, 0.8, placements[rep % 3]);
    Rng drop_rng(rep);
    auto t = forward(m, x, rep >= 6 ? std::optional<DropoutSpec>(DropoutSpec{0.5, &drop_rng})
                                    : std::nullopt);
    Target tgt = Target::hard(x.label);
    auto g = objective_gradients(m, t, tgt, cfg);
    testing::OracleOptions opt;
    opt.temperature = t.temperature;
    opt.penalty = cfg;
    if (!t.keep.empty()) opt.keep = &t.keep;
    auto xd = testing::dense(x, spec.n_features);
    auto f = [&] { return testing::oracle_objective(m, xd, tgt, opt); };
    std::size_t checked = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (std::size_t i = 0; i < m.layers[l].weights.size(); ++i) {
        auto c = testing::fd_check(m.layers[l].weights[i], g.layers[l].weights[i], f);
        if (c.skipped) continue;
        ++checked;
        ASSERT_TRUE(c.ok) << "rep " << rep << " layer " << l << " w " << i << " "
                          << c.analytic << " vs " << c.numeric;
      }
      for (std::size_t j = 0; j < m.layers[l].bias.size(); ++j) {
        auto c = testing::fd_check(m.layers[l].bias[j], g.layers[l].bias[j], f);
        if (c.skipped) continue;
        ++checked;
        ASSERT_TRUE(c.ok) << "rep " << rep << " layer " << l << " b " << j;
      }
    }
    for (std::size_t k = 0; k < xd.size(); ++k) {
      auto c = testing::fd_check(xd[k], g.input[k], f);
      if (c.skipped) continue;
      ++checked;
      ASSERT_TRUE(c.ok) << "rep " << rep << " input " << k << " " << c.analytic
                        << " vs " << c.numeric;
    }
    EXPECT_GT(checked, 50u);
  }
}

TEST(Projection, Example) {
  std::vector<LayerSpec> arch{{2, 2, Activation::identity}};
  auto m = init(arch, {HeadVariant::softmax_pair, 1}, {});
  m.layers[0].weights = {-1, 2, 0.5, -0.5};
  m.layers[0].bias = {-3, -3};
  auto p = project_nonnegative(m, HardScope::all_weights);
  EXPECT_EQ(p.layers[0].weights, (std::vector<double>{0, 2, 0.5, 0}));
  EXPECT_EQ(p.layers[0].bias, (std::vector<double>{-3, -3}));
  EXPECT_EQ(project_nonnegative(m, HardScope::none), m);
}

TEST(Projection, IdempotentAndSatisfiesScope) {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = testing::random_net({}, rng);
    auto fs = testing::random_space(20, 0.5, rng);
    for (auto scope : {HardScope::all_weights, HardScope::manifest_monotone}) {
      EXPECT_FALSE(satisfies_scope(m, scope, &fs));
      auto once = project_nonnegative(m, scope, &fs);
      EXPECT_EQ(project_nonnegative(once, scope, &fs), once);
      EXPECT_TRUE(satisfies_scope(once, scope, &fs));
    }
  }
}

TEST(Projection, ManifestMonotoneLeavesCodeRowsFree) {
  std::vector<LayerSpec> arch{{3, 2, Activation::relu}, {2, 1, Activation::identity}};
  auto m = init(arch, {HeadVariant::sigmoid_single, 1}, {});
  m.layers[0].weights = {-1, -2, -3, -4, -5, -6};
  m.layers[1].weights = {-1, 1};
  FeatureSpace fs{3, {true, false, true}};
  auto p = project_nonnegative(m, HardScope::manifest_monotone, &fs);
  EXPECT_EQ(p.layers[0].weights, (std::vector<double>{0, 0, -3, -4, 0, 0}));
  EXPECT_EQ(p.layers[1].weights, (std::vector<double>{0, 1}));
  EXPECT_THROW(project_nonnegative(m, HardScope::manifest_monotone), ParameterError);
  FeatureSpace narrow{2, {true, true}};
  EXPECT_THROW(project_nonnegative(m, HardScope::manifest_monotone, &narrow),
               ParameterError);
}

TEST(Projection, ManifestMonotoneMakesManifestGradientsNonNegative) {
  Rng rng(9);
  for (int rep = 0; rep < 30; ++rep) {
    testing::TinyNetSpec spec;
    spec.head = {HeadVariant::sigmoid_single, 1};
    auto fs = testing::random_space(spec.n_features, 0.5, rng);
    auto m = project_nonnegative(testing::random_net(spec, rng),
                                 HardScope::manifest_monotone, &fs);
    auto x = testing::random_sample(spec.n_features, 0.3, Label::malware, rng);
    auto delta0 = malware_probability_delta0(m, x);
    for (auto k : fs.manifest_indices())
      EXPECT_GE(input_gradient_at(m, delta0, k), 0.0);
  }
}

TEST(ConstraintConfigTest, HardScopeRejectsPenalty) {
  ConstraintConfig c;
  c.hard_scope = HardScope::all_weights;
  EXPECT_NO_THROW(c.validate());
  c.n1_coeff = 0.1;
  EXPECT_THROW(c.validate(), ParameterError);
  EXPECT_THROW(Penalty(-1, 0).validate(), ParameterError);
  EXPECT_THROW(Penalty(0, std::nan("")).validate(), ParameterError);
}

}  // namespace
}  // namespace monoguard
