#pragma once

// Distribution-recovery metrics for one-dimensional generated data: Gaussian
// KDE, L1 density distance, per-class moment Frechet distance, spread ratio,
// and Bayes-label consistency.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "adclab/errors.hpp"
#include "adclab/synthdata.hpp"

namespace adclab::eval {

inline constexpr std::size_t kDefaultGridPoints = 512;

struct Moments {
  double mean;
  double stddev;  // unbiased (n - 1)
};

inline Moments moments(std::span<const double> v) {
  if (v.size() < 2) throw EmptyClass("need at least two samples, got " + std::to_string(v.size()));
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

struct Bandwidth {
  double value;
  bool degenerate;  // zero sample spread; value is the 1e-3 fallback
};

/// 1.06 * std * n^(-1/5).
inline Bandwidth silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw InvalidSpec("bandwidth needs at least two samples");
  const double factor = 1.06 * std::pow(static_cast<double>(samples.size()), -0.2);
  const double sd = moments(samples).stddev;
  if (!(sd > 0.0)) return {factor * 1e-3, true};
  return {factor * sd, false};
}

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> values;
};

struct KdeEstimate : DensityCurve {
  double bandwidth = 0.0;
};

inline double trapezoid(std::span<const double> grid, std::span<const double> values) {
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  return s;
}

inline double trapezoid(const DensityCurve& c) { return trapezoid(c.grid, c.values); }

/// value(g) = 1/(n h) sum_i phi((g - x_i)/h).
inline KdeEstimate kde(std::span<const double> samples, double bandwidth,
                       std::span<const double> grid) {
  if (!(bandwidth > 0.0)) throw InvalidSpec("bandwidth must be positive");
  KdeEstimate est;
  est.bandwidth = bandwidth;
  est.grid.assign(grid.begin(), grid.end());
  est.values.assign(grid.size(), 0.0);
  if (samples.empty()) return est;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth);
  const double inv_h = 1.0 / bandwidth;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double s = 0.0;
    for (double x : samples) s += synth::normal_pdf((grid[g] - x) * inv_h);
    est.values[g] = s * norm;
  }
  return est;
}

/// 512 points over [min - 3h, max + 3h].
inline std::vector<double> default_grid(std::span<const double> samples, double bandwidth) {
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return synth::linspace(*lo - 3.0 * bandwidth, *hi + 3.0 * bandwidth, kDefaultGridPoints);
}

/// Trapezoid integral of |a - b| over their shared grid.
inline double l1_density_distance(const DensityCurve& a, const DensityCurve& b) {
  if (a.grid != b.grid || a.values.size() != a.grid.size() || b.values.size() != b.grid.size())
    throw GridMismatch("curves are not on the same grid");
  std::vector<double> diff(a.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(a.values[i] - b.values[i]);
  return trapezoid(a.grid, diff);
}

using ByClass = std::vector<std::vector<double>>;

inline ByClass split_by_class(const synth::LabeledSamples& s, std::size_t num_classes) {
  if (s.data_dim != 1) throw InvalidSpec("per-class metrics need one-dimensional data");
  ByClass out(num_classes);
  for (std::size_t i = 0; i < s.size(); ++i) out.at(s.y[i]).push_back(s.x[i]);
  return out;
}

inline void require_paired(const ByClass& real, const ByClass& fake) {
  if (real.size() != fake.size())
    throw EmptyClass("real has " + std::to_string(real.size()) + " classes, fake has " +
                     std::to_string(fake.size()));
}

/// (mu1 - mu2)^2 + (sigma1 - sigma2)^2 between fitted normals, per class.
inline std::vector<double> per_class_frechet(const ByClass& real, const ByClass& fake) {
  require_paired(real, fake);
  std::vector<double> out(real.size());
  for (std::size_t k = 0; k < real.size(); ++k) {
    const auto a = moments(real[k]);
    const auto b = moments(fake[k]);
    out[k] = (a.mean - b.mean) * (a.mean - b.mean) + (a.stddev - b.stddev) * (a.stddev - b.stddev);
  }
  return out;
}

/// fake std / real std per class.
inline std::vector<double> collapse_ratio(const ByClass& real, const ByClass& fake) {
  require_paired(real, fake);
  std::vector<double> out(real.size());
  for (std::size_t k = 0; k < real.size(); ++k)
    out[k] = moments(fake[k]).stddev / moments(real[k]).stddev;
  return out;
}

/// Index of the largest true joint density at x; ties go to the lowest label.
inline std::size_t bayes_label(const synth::GaussianMixtureSpec& spec, std::span<const double> x) {
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t y = 0; y < spec.num_classes(); ++y) {
    const double v = synth::true_density(spec, x, y);
    if (v > best_v) {
      best_v = v;
      best = y;
    }
  }
  return best;
}

/// Fraction of samples whose intended label is the Bayes-optimal label.
inline double label_consistency(const synth::GaussianMixtureSpec& spec,
                                const synth::LabeledSamples& samples) {
  spec.validate();
  if (samples.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (bayes_label(spec, samples.point(i)) == samples.y[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Grid covering the truth (means +- 6 std) and the given samples (+- 3h).
inline std::vector<double> evaluation_grid(const synth::GaussianMixtureSpec& spec,
                                           const ByClass& fake) {
  double lo = 1e300, hi = -1e300;
  for (const auto& c : spec.components) {
    lo = std::min(lo, c.mean[0] - 6.0 * c.stddev[0]);
    hi = std::max(hi, c.mean[0] + 6.0 * c.stddev[0]);
  }
  for (const auto& v : fake) {
    if (v.size() < 2) continue;
    const double h = silverman_bandwidth(v).value;
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    lo = std::min(lo, *mn - 3.0 * h);
    hi = std::max(hi, *mx + 3.0 * h);
  }
  return synth::linspace(lo, hi, kDefaultGridPoints);
}

/// Joint L1 distance sum_y integral |w_y kde_y(x) - p(x,y)| dx, with w_y the
/// fraction of generated samples carrying label y. In [0, 2].
inline double joint_l1_distance(const synth::GaussianMixtureSpec& spec, const ByClass& fake,
                                std::span<const double> grid) {
  std::size_t total = 0;
  for (const auto& v : fake) total += v.size();
  if (total == 0) throw EmptyClass("no generated samples");
  std::vector<double> diff(grid.size(), 0.0);
  for (std::size_t y = 0; y < spec.num_classes(); ++y) {
    const auto& v = fake.at(y);
    std::vector<double> est(grid.size(), 0.0);
    if (v.size() >= 2) {
      est = kde(v, silverman_bandwidth(v).value, grid).values;
      const double w = static_cast<double>(v.size()) / static_cast<double>(total);
      for (double& e : est) e *= w;
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
      diff[i] += std::abs(est[i] - synth::true_density(spec, grid[i], y));
  }
  return trapezoid(grid, diff);
}

struct RecoveryMetrics {
  double l1_density = 0.0;
  std::vector<double> frechet;
  std::vector<double> collapse;
  double label_consistency = 0.0;

  double max_frechet() const { return *std::max_element(frechet.begin(), frechet.end()); }
  double min_collapse() const { return *std::min_element(collapse.begin(), collapse.end()); }
};

inline RecoveryMetrics recovery_metrics(const synth::GaussianMixtureSpec& spec,
                                        const synth::LabeledSamples& real,
                                        const synth::LabeledSamples& fake) {
  const std::size_t k = spec.num_classes();
  const ByClass real_c = split_by_class(real, k);
  const ByClass fake_c = split_by_class(fake, k);
  RecoveryMetrics m;
  m.l1_density = joint_l1_distance(spec, fake_c, evaluation_grid(spec, fake_c));
  m.frechet = per_class_frechet(real_c, fake_c);
  m.collapse = collapse_ratio(real_c, fake_c);
  m.label_consistency = label_consistency(spec, fake);
  return m;
}

}  // namespace adclab::eval
