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

#include <cmath>

#include "monoguard/evaluation.hpp"
#include "test_support.hpp"

namespace monoguard {
namespace {

ModelParams Linear(std::vector<double> w, double bias,
                   HeadKind head = {HeadVariant::sigmoid_single, 1}) {
  std::vector<LayerSpec> arch{{w.size(), head.outputs(), Activation::identity}};
  auto m = init(arch, head, {});
  if (head.variant == HeadVariant::sigmoid_single) {
    m.layers[0].weights = std::move(w);
    m.layers[0].bias = {bias};
  } else {
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.layers[0].weights[2 * i] = 0.0;
      m.layers[0].weights[2 * i + 1] = w[i];
    }
    m.layers[0].bias = {0.0, bias};
  }
  return m;
}

Dataset LabelledSet(std::vector<Label> labels) {
  Dataset d;
  d.space = FeatureSpace{1, {true}};
  for (auto l : labels) d.samples.push_back(Sample{{}, l});
  return d;
}

TEST(Metrics, Example) {
  using L = Label;
  auto d = LabelledSet({L::benign, L::benign, L::benign, L::benign, L::malware, L::malware});
  std::vector<Label> guesses{L::malware, L::benign, L::benign, L::benign, L::benign, L::malware};
  std::size_t i = 0;
  auto m = evaluate_with([&](const Sample&) { return guesses[i++]; }, d);
  EXPECT_DOUBLE_EQ(m.fpr, 0.25);
  EXPECT_DOUBLE_EQ(m.fnr, 0.5);
  EXPECT_DOUBLE_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_EQ(m.n_benign, 4u);
  EXPECT_EQ(m.n_malware, 2u);
  EXPECT_EQ(m.to_text(),
            "fpr 0.250000\nfnr 0.500000\naccuracy 0.666667\nbenign 4\nmalware 2\n");
  m.mr = 0.4;
  EXPECT_NE(m.to_text().find("mr 0.400000\n"), std::string::npos);
}

TEST(Metrics, SingleClassAndEmpty) {
  auto d = LabelledSet({Label::malware, Label::malware});
  auto m = evaluate_with([](const Sample&) { return Label::malware; }, d);
  EXPECT_EQ(m.fpr, 0.0);
  EXPECT_EQ(m.fnr, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_THROW(evaluate(Linear({1.0}, 0.0), Dataset{}), ParameterError);
}

TEST(Certify, NonNegativeSigmoidPasses) {
  Rng rng(20);
  testing::TinyNetSpec spec;
  spec.head = {HeadVariant::sigmoid_single, 1};
  auto m = project_nonnegative(testing::random_net(spec, rng), HardScope::all_weights);
  auto fs = testing::random_space(spec.n_features, 0.5, rng);
  std::vector<Sample> pool;
  for (int i = 0; i < 30; ++i)
    pool.push_back(testing::random_sample(spec.n_features, 0.3, Label::benign, rng));
  Rng trials(1);
  auto rep = certify_monotone(m, fs, pool, 2000, trials);
  EXPECT_TRUE(rep.structural_pass);
  EXPECT_TRUE(rep.behavioral_pass);
  EXPECT_EQ(rep.trials, 2000u);
  EXPECT_EQ(rep.to_text(), "structural PASS\nbehavioral PASS trials 2000\n");
}

TEST(Certify, NegativeWeightIsCaught) {
  auto m = Linear({1.0, -2.0}, 0.0);
  FeatureSpace fs{2, {true, true}};
  std::vector<Sample> pool{Sample{{0}, Label::malware}};
  Rng rng(2);
  auto rep = certify_monotone(m, fs, pool, 50, rng);
  EXPECT_FALSE(rep.structural_pass);
  EXPECT_FALSE(rep.behavioral_pass);
  ASSERT_FALSE(rep.counterexamples.empty());
  EXPECT_EQ(rep.counterexamples[0].feature, 1u);
  EXPECT_LT(rep.counterexamples[0].p_flipped, rep.counterexamples[0].p_original);
  EXPECT_LE(rep.counterexamples.size(), 10u);
}

TEST(Certify, SoftmaxHeadIsNotStructurallyCertified) {
  auto m = Linear({1.0, 2.0}, 0.0, {HeadVariant::softmax_pair, 1});
  FeatureSpace fs{2, {true, true}};
  std::vector<Sample> pool{Sample{{}, Label::benign}};
  Rng rng(3);
  auto rep = certify_monotone(m, fs, pool, 0, rng);
  EXPECT_FALSE(rep.structural_pass);
  EXPECT_TRUE(rep.structural_only);
  EXPECT_EQ(rep.to_text(), "structural FAIL\nbehavioral PASS trials 0 structural-only\n");
}

TEST(Certify, ManifestScopeOnlyFlipsManifestFeatures) {
  auto m = Linear({1.0, -5.0, 0.5}, 0.0);
  FeatureSpace fs{3, {true, false, true}};
  std::vector<Sample> pool{Sample{{}, Label::benign}, Sample{{0}, Label::malware}};
  Rng rng(4);
  auto rep = certify_monotone(m, fs, pool, 500, rng, HardScope::manifest_monotone);
  EXPECT_TRUE(rep.structural_pass);
  EXPECT_TRUE(rep.behavioral_pass);
  Rng rng2(4);
  EXPECT_FALSE(certify_monotone(m, fs, pool, 500, rng2).behavioral_pass);
  Rng rng3(4);
  EXPECT_THROW(certify_monotone(m, fs, pool, 5, rng3, HardScope::none), ParameterError);
}

TEST(Fallback, Rules) {
  auto restricted = Linear({2.0, 0.0}, -1.0);    // malware iff feature 0
  auto unrestricted = Linear({0.0, 2.0}, -1.0);  // malware iff feature 1
  EXPECT_EQ(fallback_predict(restricted, unrestricted, Sample{{0}, Label::benign}), Label::malware);
  EXPECT_EQ(fallback_predict(restricted, unrestricted, Sample{{1}, Label::benign}), Label::malware);
  EXPECT_EQ(fallback_predict(restricted, unrestricted, Sample{{}, Label::benign}), Label::benign);
  auto wider = Linear({0.0, 2.0, 0.0}, -1.0);
  EXPECT_THROW(fallback_predict(restricted, wider, Sample{}), ParameterError);
}

TEST(Fallback, FalseNegativesAreASubset) {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    testing::TinyNetSpec spec;
    spec.head = {HeadVariant::sigmoid_single, 1};
    auto a = testing::random_net(spec, rng);
    auto b = testing::random_net(spec, rng);
    a.feature_space_id = b.feature_space_id;
    for (int i = 0; i < 40; ++i) {
      auto x = testing::random_sample(spec.n_features, 0.3, Label::malware, rng);
      const bool fallback_miss = fallback_predict(a, b, x) == Label::benign;
      if (fallback_miss) {
        EXPECT_EQ(predict(a, x), Label::benign);
        EXPECT_EQ(predict(b, x), Label::benign);
      }
    }
  }
}

class GridTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SynthSpec s;
    s.n_features = 200;
    s.n_samples = 800;
    s.malware_fraction = 0.25;
    s.mean_density = 10;
    s.n_rules = 6;
    std::tie(train_, test_) = split(generate_synthetic(s), 0.25, 1);
    spec_.n1_values = {0, 0.05, 0.5};
    spec_.n2_values = {0, 1};
    spec_.seeds = {1, 2};
    spec_.base_train.epochs = 2;
    spec_.base_train.batch_size = 100;
    spec_.base_train.learning_rate = 0.05;
  }
  Dataset train_, test_;
  GridSpec spec_;
  Architecture arch_{{12, 12}, {HeadVariant::sigmoid_single, 1}};
};

TEST_F(GridTest, ShapeFormatAndCellZero) {
  AttackConfig atk;
  auto rep = grid_search(train_, test_, arch_, spec_, atk, 2);
  ASSERT_EQ(rep.runs.size(), 12u);
  for (const auto& r : rep.runs) EXPECT_TRUE(r.ok) << r.error;
  auto csv = rep.heatmap_csv(GridMetric::mr);
  auto lines = text::split(csv, '\n');
  ASSERT_EQ(lines.size(), 5u);  // header, three rows, trailing empty
  EXPECT_EQ(lines[0], "n1\\n2,0,1");
  EXPECT_EQ(lines[1].substr(0, 2), "0,");
  EXPECT_EQ(text::split(lines[3], ',').size(), 3u);

  // Cell (0, 0) reproduces an unconstrained run bit for bit.
  auto plain = train(train_, arch_, spec_.base_train.with_seed(1));
  const auto& cell = rep.run(0, 0, 0);
  EXPECT_EQ(cell.metrics.to_text(), [&] {
    auto m = evaluate(plain.model, test_);
    m.mr = misclassification_rate(plain.model, test_.of_label(Label::malware), test_.space, atk).rate;
    return m.to_text();
  }());
  EXPECT_EQ(cell.negative_mass, negative_mass(plain.model));

  const std::string runs_text = rep.runs_csv();
  auto runs = text::split(runs_text, '\n');
  EXPECT_EQ(runs[0], "n1,n2,seed,status,mr,fnr,fpr,accuracy,negmass");
  EXPECT_EQ(runs.size(), 14u);
}

TEST_F(GridTest, NegativeMassFallsAlongN1) {
  spec_.n2_values = {0};
  spec_.seeds = {1};
  spec_.n1_values = {0, 0.01, 0.1};
  auto rep = grid_search(train_, test_, arch_, spec_, {});
  EXPECT_GE(rep.run(0, 0, 0).negative_mass, rep.run(1, 0, 0).negative_mass);
  EXPECT_GE(rep.run(1, 0, 0).negative_mass, rep.run(2, 0, 0).negative_mass);
}

TEST_F(GridTest, FailedRunsAreRecorded) {
  spec_.base_train.learning_rate = 1e300;
  spec_.base_train.momentum = 0;
  spec_.n1_values = {0};
  spec_.n2_values = {0};
  auto rep = grid_search(train_, test_, arch_, spec_, {});
  EXPECT_FALSE(rep.run(0, 0, 0).ok);
  EXPECT_TRUE(std::isnan(rep.cell_mean(0, 0, GridMetric::mr)));
  EXPECT_EQ(rep.heatmap_csv(GridMetric::fnr), "n1\\n2,0\n0,nan\n");
  EXPECT_NE(rep.runs_csv().find(",error,"), std::string::npos);
  spec_.seeds.clear();
  EXPECT_THROW(grid_search(train_, test_, arch_, spec_, {}), ParameterError);
}

}  // namespace
}  // namespace monoguard
