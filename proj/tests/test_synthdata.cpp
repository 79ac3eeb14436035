#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "adclab/synthdata.hpp"
#include "adclab/tabular.hpp"

using namespace adclab;
using namespace adclab::synth;

namespace {

// Standard normal CDF by composite Simpson on [-12, z]; independent of erfc.
double simpson_cdf(double z) {
  const double lo = -12.0;
  const int n = 20000;
  const double h = (z - lo) / n;
  const auto f = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  double s = f(lo) + f(z);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Spec, DefaultAndValidation) {
  const auto s = GaussianMixtureSpec::default_1d();
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.num_classes(), 3u);
  auto bad = s;
  bad.components[0].prior = 0.5;
  EXPECT_THROW(bad.validate(), InvalidSpec);
  bad = s;
  bad.components[1].stddev[0] = 0.0;
  EXPECT_THROW(bad.validate(), InvalidSpec);
  EXPECT_THROW(GaussianMixtureSpec{}.validate(), InvalidSpec);
}

TEST(Sample, SeedRepeatAndSingleClassMean) {
  const auto s = GaussianMixtureSpec::default_1d();
  const auto a = sample(s, 1000, 5);
  const auto b = sample(s, 1000, 5);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_THROW(sample(s, 0, 1), InvalidSpec);

  GaussianMixtureSpec one;
  one.components.push_back({{1.5}, {0.7}, 1.0});
  const auto c = sample(one, 100000, 6);
  double mean = 0.0;
  for (double v : c.x) mean += v;
  mean /= 100000.0;
  EXPECT_NEAR(mean, 1.5, 0.02);
}

TEST(Sample, LabelHistogramMatchesPriors) {
  GaussianMixtureSpec s;
  s.components = {{{0.0}, {1.0}, 0.2}, {{1.0}, {1.0}, 0.5}, {{2.0}, {1.0}, 0.3}};
  const auto d = sample(s, 100000, 7);
  std::vector<double> counts(3, 0.0);
  for (auto y : d.y) counts[y] += 1.0;
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(counts[k] / 100000.0, s.components[k].prior, 0.01);
}

TEST(MixtureCdf, AgainstQuadrature) {
  const auto s = GaussianMixtureSpec::default_1d();
  for (double x : {-5.0, -2.3, -0.4, 0.0, 1.1, 3.7}) {
    double f = 0.0;
    for (const auto& c : s.components) f += c.prior * simpson_cdf((x - c.mean[0]) / c.stddev[0]);
    EXPECT_NEAR(mixture_cdf(s, x), f, 1e-10);
  }
}

TEST(Sample, KolmogorovSmirnovAgainstTrueCdf) {
  const auto s = GaussianMixtureSpec::default_1d();
  auto d = sample(s, 100000, 9);
  std::sort(d.x.begin(), d.x.end());
  double ks = 0.0;
  const double n = static_cast<double>(d.x.size());
  for (std::size_t i = 0; i < d.x.size(); ++i) {
    const double f = mixture_cdf(s, d.x[i]);
    ks = std::max({ks, std::abs(static_cast<double>(i + 1) / n - f), std::abs(static_cast<double>(i) / n - f)});
  }
  EXPECT_LT(ks, 0.01);
}

TEST(TrueDensity, Examples) {
  const auto s = GaussianMixtureSpec::default_1d();
  const double peak = 1.0 / (3.0 * std::sqrt(2.0 * std::numbers::pi));
  EXPECT_NEAR(true_density(s, 0.0, 1), peak, 1e-15);
  EXPECT_NEAR(true_density(s, 2.0, 2), 0.132981, 5e-7);
  EXPECT_LT(true_density(s, 60.0, 0), 1e-300);
  const auto grid = linspace(-10.0, 10.0, 20001);
  double mass = 0.0;
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t i = 1; i < grid.size(); ++i)
      mass += 0.5 * (grid[i] - grid[i - 1]) *
              (true_density(s, grid[i], y) + true_density(s, grid[i - 1], y));
  EXPECT_NEAR(mass, 1.0, 1e-6);
  const auto joint = true_joint_density(s, std::vector<double>{0.3});
  for (std::size_t y = 0; y < 3; ++y) EXPECT_EQ(joint[y], true_density(s, 0.3, y));
}

TEST(Discretize, MassAndErrors) {
  const auto s = GaussianMixtureSpec::default_1d();
  const auto grid = linspace(-8.0, 8.0, 256);
  const auto t = discretize(s, grid);
  double total = 0.0;
  for (double v : t.probs()) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(t.num_points(), 256u);
  EXPECT_GT(tabular::conditional_entropy(t), 0.0);
  EXPECT_THROW(discretize(s, std::vector<double>{0.0}), DegenerateGrid);
  EXPECT_THROW(discretize(s, std::vector<double>{0.0, 1.0, 1.0}), DegenerateGrid);
}

TEST(Discretize, DeterministicLabelsHaveZeroEntropy) {
  GaussianMixtureSpec s;
  s.components = {{{-30.0}, {0.5}, 0.5}, {{30.0}, {0.5}, 0.5}};
  const auto t = discretize(s, linspace(-40.0, 40.0, 400));
  EXPECT_LT(tabular::conditional_entropy(t), 1e-12);
}

TEST(Discretize, BinMassMatchesIntegratedDensity) {
  const auto s = GaussianMixtureSpec::default_1d();
  const auto grid = linspace(-8.0, 8.0, 1024);
  const auto t = discretize(s, grid);
  const double h = grid[1] - grid[0];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // exact cell integral from the Simpson CDF oracle is costly; use a fine
    // trapezoid over the cell instead
    const double lo = grid[i] - 0.5 * h, hi = grid[i] + 0.5 * h;
    const int m = 64;
    double integral = 0.0;
    for (int j = 0; j <= m; ++j) {
      const double x = lo + (hi - lo) * j / m;
      double f = 0.0;
      for (std::size_t y = 0; y < 3; ++y) f += true_density(s, x, y);
      integral += (j == 0 || j == m ? 0.5 : 1.0) * f;
    }
    integral *= (hi - lo) / m;
    EXPECT_NEAR(t.marginal_x(i) / integral, 1.0, 1e-3) << "bin " << i;
  }
}
