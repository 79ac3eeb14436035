#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adclab/nn.hpp"
#include "adclab/rng.hpp"

using namespace adclab;
using namespace adclab::nn;

namespace {

NetDims small_dims() {
  NetDims d;
  d.latent_dim = 3;
  d.data_dim = 1;
  d.feature_dim = 5;
  d.num_classes = 3;
  d.hidden = {6, 4};
  return d;
}

ad::Tensor random_batch(std::size_t n, std::size_t cols, Rng& rng, double scale = 1.0) {
  ad::Tensor t(ad::Shape{n, cols});
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

void zero_all(ModelParams& p) {
  for (auto& nt : p.tensors())
    for (double& v : nt.tensor->data()) v = 0.0;
}

}  // namespace

TEST(InitParams, DeterministicAndZeroBias) {
  auto a = init_params(small_dims(), 42);
  auto b = init_params(small_dims(), 42);
  auto c = init_params(small_dims(), 43);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (const auto& l : a.generator)
    for (double v : l.bias.data()) EXPECT_EQ(v, 0.0);
  for (const auto& l : a.phi)
    for (double v : l.bias.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(a.emb_plus.shape(), a.emb_minus.shape());
  EXPECT_EQ(a.emb_extended.rows(), 4u);
}

TEST(InitParams, GlorotVariance) {
  NetDims d;
  d.hidden = {64, 64};
  auto p = init_params(d, 7);
  const auto& w = p.generator[1].weight;  // 64 x 64
  ASSERT_EQ(w.rows(), 64u);
  ASSERT_EQ(w.cols(), 64u);
  double mean = 0.0;
  for (double v : w.data()) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (double v : w.data()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size() - 1);
  const double target = 2.0 / 128.0;
  EXPECT_NEAR(var, target, 0.2 * target);
}

TEST(InitParams, RejectsZeroDims) {
  auto d = small_dims();
  d.feature_dim = 0;
  EXPECT_THROW(init_params(d, 1), InvalidSpec);
  d = small_dims();
  d.hidden = {4, 0};
  EXPECT_THROW(init_params(d, 1), InvalidSpec);
}

TEST(Generate, ZeroWeightsGiveOutputBias) {
  auto p = init_params(small_dims(), 1);
  zero_all(p);
  p.generator.back().bias[0] = 0.625;
  Rng rng(2);
  const auto z = random_batch(5, 3, rng);
  const std::vector<std::size_t> y{0, 1, 2, 1, 0};
  const auto out = generate_values(p, z, y);
  for (double v : out.data()) EXPECT_EQ(v, 0.625);
}

TEST(Generate, DeterministicAndLabelChecked) {
  auto p = init_params(small_dims(), 3);
  Rng rng(4);
  const auto z = random_batch(4, 3, rng);
  const std::vector<std::size_t> y{0, 1, 2, 0};
  EXPECT_EQ(generate_values(p, z, y), generate_values(p, z, y));
  const std::vector<std::size_t> bad{0, 1, 3, 0};
  EXPECT_THROW(generate_values(p, z, bad), LabelOutOfRange);
  EXPECT_THROW(generate_values(p, random_batch(4, 2, rng), y), ShapeMismatch);
}

TEST(Generate, GradientMatchesFiniteDifferences) {
  auto p = init_params(small_dims(), 5);
  Rng rng(6);
  const auto z = random_batch(6, 3, rng);
  const std::vector<std::size_t> y{0, 1, 2, 2, 1, 0};
  auto& w = p.generator[0].weight;
  const auto f = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), w.data().begin());
    ad::Tape tape;
    BoundModel m(tape, p);
    const ad::NodeId loss = tape.mean(tape.square(m.generate(z, y)));
    const auto g = tape.backward(loss);
    const auto gw = g[m.leaves()[0]].data();
    return ad::ValueAndGradient{tape.value(loss).item(), {gw.begin(), gw.end()}};
  };
  const std::vector<double> point(w.data().begin(), w.data().end());
  EXPECT_LT(ad::grad_check(f, point), 1e-5);
}

TEST(Heads, OneFeatureEvaluationForAllHeads) {
  auto p = init_params(small_dims(), 8);
  Rng rng(9);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(random_batch(7, 1, rng)));
  EXPECT_EQ(m.phi_evaluations(), 1u);
  EXPECT_EQ(tape.value(h.disc_logit).shape(), (ad::Shape{7, 1}));
  EXPECT_EQ(tape.value(h.class_plus).shape(), (ad::Shape{7, 3}));
  EXPECT_EQ(tape.value(h.class_minus).shape(), (ad::Shape{7, 3}));
  EXPECT_EQ(tape.value(h.extended).shape(), (ad::Shape{7, 4}));
}

TEST(Heads, ZeroFeaturesGiveUniformDiscriminativeClassifier) {
  auto p = init_params(small_dims(), 10);
  for (auto& l : p.phi) {
    for (double& v : l.weight.data()) v = 0.0;
    for (double& v : l.bias.data()) v = 0.0;
  }
  Rng rng(11);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(random_batch(4, 1, rng)));
  const auto lse = tape.logsumexp(tape.concat(h.class_plus, h.class_minus));
  const ad::Tensor cp = tape.value(h.class_plus);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_NEAR(std::exp(cp.at(i, k) - tape.value(lse)[i]), 1.0 / 6.0, 1e-15);
}

TEST(Heads, SoftmaxOverTwoKSumsToOneAndPartitionCancels) {
  auto p = init_params(small_dims(), 12);
  Rng rng(13);
  const auto x = random_batch(9, 1, rng, 2.0);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(x));
  const auto both = tape.concat(h.class_plus, h.class_minus);
  const ad::Tensor logits = tape.value(both);
  const ad::Tensor lse = tape.value(tape.logsumexp(both));
  const ad::Tensor feat = tape.value(h.features);
  for (std::size_t i = 0; i < 9; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += std::exp(logits.at(i, j) - lse[i]);
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t y = 0; y < 3; ++y) {
      const double log_ratio = (logits.at(i, y) - lse[i]) - (logits.at(i, 3 + y) - lse[i]);
      double proj = 0.0;
      for (std::size_t d = 0; d < 5; ++d)
        proj += (p.emb_plus.at(y, d) - p.emb_minus.at(y, d)) * feat.at(i, d);
      EXPECT_NEAR(log_ratio, proj, 1e-12);
    }
  }
}

TEST(Heads, FiniteForLargeInputs) {
  auto p = init_params(small_dims(), 14);
  ad::Tensor x(ad::Shape{3, 1}, std::vector<double>{-1000.0, 0.0, 1000.0});
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(x));
  for (auto id : {h.disc_logit, h.class_plus, h.class_minus, h.extended})
    for (double v : tape.value(id).data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(PdLogit, EqualEmbeddingsGiveUnconditionalLogit) {
  auto p = init_params(small_dims(), 15);
  p.emb_minus = p.emb_plus;
  Rng rng(16);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(random_batch(5, 1, rng)));
  const std::vector<std::size_t> y{2, 1, 0, 1, 2};
  const ad::Tensor pd = tape.value(m.pd_logit(h, y));
  const ad::Tensor d = tape.value(h.disc_logit);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(pd[i], d[i]);
  EXPECT_THROW(m.pd_logit(h, std::vector<std::size_t>{0, 0, 0, 0, 3}), LabelOutOfRange);
}

TEST(PdLogit, ZeroPsiGivesProjectionTerm) {
  auto p = init_params(small_dims(), 17);
  for (double& v : p.psi.weight.data()) v = 0.0;
  Rng rng(18);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(random_batch(4, 1, rng)));
  const std::vector<std::size_t> y{0, 1, 2, 0};
  const ad::Tensor pd = tape.value(m.pd_logit(h, y));
  const ad::Tensor feat = tape.value(h.features);
  for (std::size_t i = 0; i < 4; ++i) {
    double proj = 0.0;
    for (std::size_t d = 0; d < 5; ++d)
      proj += (p.emb_plus.at(y[i], d) - p.emb_minus.at(y[i], d)) * feat.at(i, d);
    EXPECT_NEAR(pd[i], proj, 1e-14);
  }
}

TEST(PdLogit, HeuristicDiffersFromFullLogitByPartitionTerm) {
  auto p = init_params(small_dims(), 19);
  Rng rng(20);
  ad::Tape tape;
  BoundModel m(tape, p);
  const auto h = m.heads(tape.constant(random_batch(8, 1, rng, 3.0)));
  const std::vector<std::size_t> y(8, 1);
  const ad::Tensor heuristic = tape.value(m.pd_logit(h, y));
  const ad::Tensor full = tape.value(m.pd_logit_full(h, y));
  const ad::Tensor cp = tape.value(h.class_plus);
  const ad::Tensor cm = tape.value(h.class_minus);
  const ad::Tensor d = tape.value(h.disc_logit);
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < 8; ++i) {
    // psi + log softmax+(y) - log softmax-(y), from raw head values
    double zp = 0.0, zm = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      zp += std::exp(cp.at(i, k));
      zm += std::exp(cm.at(i, k));
    }
    const double expected = d[i] + (cp.at(i, 1) - std::log(zp)) - (cm.at(i, 1) - std::log(zm));
    EXPECT_NEAR(full[i], expected, 1e-12);
    const double gap = heuristic[i] - full[i];
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
  }
  EXPECT_GT(hi - lo, 1e-6);  // the dropped term varies with x
}
