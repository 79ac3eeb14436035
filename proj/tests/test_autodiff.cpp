#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "adclab/autodiff.hpp"
#include "adclab/rng.hpp"

using namespace adclab;
using namespace adclab::ad;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(Shape{r, c});
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Builds a scalar expression from leaves holding `shapes`, with values taken
// from a flat parameter vector, and reports value and flat gradient.
using Builder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

ValueAndGradient evaluate(const std::vector<Shape>& shapes, const Builder& build,
                          std::span<const double> flat) {
  Tape tape;
  std::vector<NodeId> leaves;
  std::size_t at = 0;
  for (const auto& s : shapes) {
    const std::size_t n = shape_size(s);
    leaves.push_back(tape.leaf(Tensor(s, std::vector<double>(flat.begin() + at, flat.begin() + at + n))));
    at += n;
  }
  const NodeId out = build(tape, leaves);
  const auto grads = tape.backward(out);
  ValueAndGradient r{tape.value(out).item(), {}};
  for (NodeId l : leaves)
    for (double g : grads[l].data()) r.gradient.push_back(g);
  return r;
}

double check_primitive(const std::vector<Shape>& shapes, const Builder& build, Rng& rng,
                       double scale = 1.0, double offset = 0.0) {
  std::size_t total = 0;
  for (const auto& s : shapes) total += shape_size(s);
  std::vector<double> point(total);
  for (double& v : point) v = offset + scale * rng.normal();
  return grad_check([&](std::span<const double> x) { return evaluate(shapes, build, x); }, point);
}

// Weighted sum so that every output entry gets a distinct upstream gradient.
NodeId weighted(Tape& t, NodeId a) {
  const Tensor& v = t.value(a);
  Tensor w(v.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  return t.sum(t.mul(a, t.constant(std::move(w))));
}

}  // namespace

TEST(Tensor, ShapeValidation) {
  EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<double>(5)), ShapeMismatch);
  EXPECT_EQ(Tensor().size(), 1u);
  EXPECT_EQ(Tensor(Shape{2, 3}).size(), 6u);
}

TEST(Tape, ForwardExamples) {
  Tape t;
  const NodeId a = t.leaf(Tensor(Shape{2}, {1, 2}));
  const NodeId b = t.leaf(Tensor(Shape{2}, {3, 4}));
  const auto& s = t.value(t.add(a, b));
  EXPECT_EQ(s[0], 4.0);
  EXPECT_EQ(s[1], 6.0);
  const NodeId z = t.leaf(Tensor::matrix(1, 2, {0, 0}));
  EXPECT_NEAR(t.value(t.logsumexp(z)).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(t.value(t.logsumexp(z)).item(), 0.693147, 1e-6);
}

TEST(Tape, MatmulAgainstNaiveLoop) {
  Rng rng(1);
  const Tensor a = random_matrix(2, 3, rng), b = random_matrix(3, 2, rng);
  Tape t;
  const auto& c = t.value(t.matmul(t.leaf(a), t.leaf(b)));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-14);
    }
}

TEST(Tape, AffineAgainstNaiveLoop) {
  Rng rng(2);
  const Tensor x = random_matrix(4, 3, rng), w = random_matrix(5, 3, rng);
  Tensor b(Shape{5});
  for (double& v : b.data()) v = rng.normal();
  Tape t;
  const auto& y = t.value(t.affine(t.leaf(x), t.leaf(w), t.leaf(b)));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t o = 0; o < 5; ++o) {
      double s = b[o];
      for (std::size_t k = 0; k < 3; ++k) s += x.at(i, k) * w.at(o, k);
      EXPECT_NEAR(y.at(i, o), s, 1e-14);
    }
}

TEST(Tape, ShapeErrors) {
  Tape t;
  const NodeId a = t.leaf(Tensor(Shape{2, 3}));
  const NodeId b = t.leaf(Tensor(Shape{2, 2}));
  EXPECT_THROW(t.add(a, b), ShapeMismatch);
  EXPECT_THROW(t.matmul(a, a), ShapeMismatch);
  EXPECT_THROW(t.select_column(a, {0}), ShapeMismatch);
  EXPECT_THROW(t.gather_rows(a, {2}), ShapeMismatch);
  EXPECT_THROW(t.concat(a, t.leaf(Tensor(Shape{3, 1}))), ShapeMismatch);
  EXPECT_THROW(t.backward(a), NonScalarOutput);
}

TEST(Backward, Examples) {
  Tape t;
  const NodeId x = t.leaf(Tensor::scalar(3.0));
  const auto g = t.backward(t.sum(t.square(x)));
  EXPECT_EQ(g[x].item(), 6.0);

  Tape u;
  const NodeId v = u.leaf(Tensor::matrix(1, 2, {0, 0}));
  const auto gv = u.backward(u.sum(u.logsumexp(v)));
  EXPECT_NEAR(gv[v][0], 0.5, 1e-15);
  EXPECT_NEAR(gv[v][1], 0.5, 1e-15);
}

TEST(Backward, UnreachableLeavesGetZero) {
  Tape t;
  const NodeId a = t.leaf(Tensor::matrix(1, 2, {1, 2}));
  const NodeId b = t.leaf(Tensor::matrix(1, 2, {3, 4}));
  const auto g = t.backward(t.sum(a));
  EXPECT_EQ(g[b][0], 0.0);
  EXPECT_EQ(g[b][1], 0.0);
}

TEST(Backward, DeterministicAcrossCalls) {
  Rng rng(3);
  Tape t;
  const NodeId a = t.leaf(random_matrix(3, 4, rng));
  const NodeId out = t.mean(t.logsumexp(t.tanh(a)));
  const auto g1 = t.backward(out);
  const auto g2 = t.backward(out);
  EXPECT_EQ(g1[a], g2[a]);
}

TEST(Backward, Linearity) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor v = random_matrix(3, 4, rng);
    Tape t;
    const NodeId a = t.leaf(v);
    const NodeId f = t.sum(t.tanh(a));
    const NodeId h = t.mean(t.logsumexp(t.mul(a, a)));
    const auto gf = t.backward(f);
    const auto gh = t.backward(h);
    const auto gs = t.backward(t.add(f, h));
    for (std::size_t i = 0; i < v.size(); ++i)
      EXPECT_NEAR(gs[a][i], gf[a][i] + gh[a][i], 1e-14);
  }
}

TEST(Logsumexp, ShiftInvariance) {
  Rng rng(5);
  const Tensor v = random_matrix(4, 6, rng, 3.0);
  Tensor shifted = v;
  for (double& x : shifted.data()) x += 700.0;
  Tape t;
  const NodeId a = t.leaf(v), b = t.leaf(shifted);
  const NodeId la = t.logsumexp(a), lb = t.logsumexp(b);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(t.value(lb)[i], t.value(la)[i] + 700.0, 1e-12 * 700.0);
  const auto ga = t.backward(t.sum(la));
  const auto gb = t.backward(t.sum(lb));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(ga[a][i], gb[b][i], 1e-12);
}

TEST(GradCheck, Examples) {
  const auto linear = [](std::span<const double> x) {
    return ValueAndGradient{3.0 * x[0] - 2.0 * x[1], {3.0, -2.0}};
  };
  const std::vector<double> p{0.7, -1.3};
  EXPECT_LT(grad_check(linear, p), 1e-9);
  const auto e = [](std::span<const double> x) {
    return ValueAndGradient{std::exp(x[0]), {std::exp(x[0])}};
  };
  EXPECT_LT(grad_check(e, std::vector<double>{0.0}, 1e-6), 1e-8);
  const auto bad = [](std::span<const double> x) {
    return ValueAndGradient{std::log(x[0]), {1.0 / x[0]}};
  };
  EXPECT_THROW(grad_check(bad, std::vector<double>{-1.0}), NonFinite);
}

TEST(GradCheck, EveryPrimitive) {
  Rng rng(6);
  const Shape m34{3, 4}, m43{4, 3}, m32{3, 2};
  struct Case {
    const char* name;
    std::vector<Shape> shapes;
    Builder build;
    double offset = 0.0;
  };
  std::vector<Case> cases = {
      {"add", {m34, m34}, [](Tape& t, auto& l) { return weighted(t, t.add(l[0], l[1])); }},
      {"sub", {m34, m34}, [](Tape& t, auto& l) { return weighted(t, t.sub(l[0], l[1])); }},
      {"mul", {m34, m34}, [](Tape& t, auto& l) { return weighted(t, t.mul(l[0], l[1])); }},
      {"matmul", {m34, m43}, [](Tape& t, auto& l) { return weighted(t, t.matmul(l[0], l[1])); }},
      {"affine", {m34, Shape{2, 4}, Shape{2}},
       [](Tape& t, auto& l) { return weighted(t, t.affine(l[0], l[1], l[2])); }},
      {"leaky_relu", {m34}, [](Tape& t, auto& l) { return weighted(t, t.leaky_relu(l[0], 0.2)); }},
      {"tanh", {m34}, [](Tape& t, auto& l) { return weighted(t, t.tanh(l[0])); }},
      {"exp", {m34}, [](Tape& t, auto& l) { return weighted(t, t.exp(l[0])); }},
      {"log", {m34}, [](Tape& t, auto& l) { return weighted(t, t.log(t.exp(l[0]))); }},
      {"sigmoid", {m34}, [](Tape& t, auto& l) { return weighted(t, t.sigmoid(l[0])); }},
      {"square", {m34}, [](Tape& t, auto& l) { return weighted(t, t.square(l[0])); }},
      {"sum", {m34}, [](Tape& t, auto& l) { return t.sum(t.square(l[0])); }},
      {"mean", {m34}, [](Tape& t, auto& l) { return t.mean(t.square(l[0])); }},
      {"logsumexp", {m34}, [](Tape& t, auto& l) { return weighted(t, t.logsumexp(l[0])); }},
      {"gather_rows", {m32},
       [](Tape& t, auto& l) { return weighted(t, t.gather_rows(l[0], {2, 0, 2, 1})); }},
      {"select_column", {m34},
       [](Tape& t, auto& l) { return weighted(t, t.select_column(l[0], {3, 0, 1})); }},
      {"concat", {m34, m32}, [](Tape& t, auto& l) { return weighted(t, t.concat(l[0], l[1])); }},
      {"scale", {m34}, [](Tape& t, auto& l) { return weighted(t, t.scale(l[0], -1.7)); }},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) worst = std::max(worst, check_primitive(c.shapes, c.build, rng));
    EXPECT_LT(worst, 1e-5) << c.name;
  }
}

TEST(GradCheck, LogOnPositiveInputs) {
  Rng rng(7);
  const Builder b = [](Tape& t, auto& l) { return weighted(t, t.log(l[0])); };
  for (int i = 0; i < 20; ++i) {
    std::vector<double> point(6);
    for (double& v : point) v = 0.5 + rng.uniform();
    EXPECT_LT(grad_check([&](std::span<const double> x) { return evaluate({Shape{2, 3}}, b, x); },
                         point),
              1e-5);
  }
}
