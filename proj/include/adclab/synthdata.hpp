#pragma once

// Labeled mixture-of-Gaussians ground truth: sampling, exact densities, and
// discretization onto a grid as a JointTable.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "adclab/errors.hpp"
#include "adclab/rng.hpp"
#include "adclab/tabular.hpp"

namespace adclab::synth {

struct Component {
  std::vector<double> mean;
  std::vector<double> stddev;  // axis-aligned
  double prior;
};

struct GaussianMixtureSpec {
  std::size_t data_dim = 1;
  std::vector<Component> components;

  std::size_t num_classes() const { return components.size(); }

  void validate() const {
    if (components.empty()) throw InvalidSpec("mixture has no components");
    if (data_dim == 0) throw InvalidSpec("data_dim must be positive");
    double total = 0.0;
    for (const auto& c : components) {
      if (c.mean.size() != data_dim || c.stddev.size() != data_dim)
        throw InvalidSpec("component dimension differs from data_dim");
      if (!(c.prior > 0.0)) throw InvalidSpec("priors must be positive");
      for (double s : c.stddev)
        if (!(s > 0.0)) throw InvalidSpec("standard deviations must be positive");
      total += c.prior;
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidSpec("priors must sum to 1");
  }

  /// Three unit-variance classes at -2, 0, +2 with equal priors.
  static GaussianMixtureSpec default_1d() {
    GaussianMixtureSpec s;
    for (double m : {-2.0, 0.0, 2.0}) s.components.push_back({{m}, {1.0}, 1.0 / 3.0});
    return s;
  }
};

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct LabeledSamples {
  std::size_t data_dim = 1;
  std::vector<double> x;  // n x data_dim, row-major
  std::vector<std::size_t> y;

  std::size_t size() const { return y.size(); }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(x).subspan(i * data_dim, data_dim);
  }
};

/// Draws one label from the priors by inverse CDF.
inline std::size_t sample_label(const GaussianMixtureSpec& spec, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    acc += spec.components[k].prior;
    if (u < acc) return k;
  }
  return spec.components.size() - 1;
}

/// Label from the priors, then x | y from the class Gaussian (Box-Muller
/// normals on the same uniform stream).
inline void sample_into(const GaussianMixtureSpec& spec, std::size_t n, Rng& rng,
                        LabeledSamples& out) {
  out.data_dim = spec.data_dim;
  out.x.resize(n * spec.data_dim);
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = sample_label(spec, rng);
    out.y[i] = k;
    const auto& c = spec.components[k];
    for (std::size_t d = 0; d < spec.data_dim; ++d)
      out.x[i * spec.data_dim + d] = rng.normal(c.mean[d], c.stddev[d]);
  }
}

inline LabeledSamples sample(const GaussianMixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw InvalidSpec("sample size must be positive");
  Rng rng(seed);
  LabeledSamples out;
  sample_into(spec, n, rng, out);
  return out;
}

/// p(x, y) = prior_y * N(x; mean_y, diag(std_y^2)).
inline double true_density(const GaussianMixtureSpec& spec, std::span<const double> x,
                           std::size_t y) {
  const auto& c = spec.components.at(y);
  double d = c.prior;
  for (std::size_t i = 0; i < spec.data_dim; ++i)
    d *= normal_pdf((x[i] - c.mean[i]) / c.stddev[i]) / c.stddev[i];
  return d;
}

inline double true_density(const GaussianMixtureSpec& spec, double x, std::size_t y) {
  return true_density(spec, std::span<const double>(&x, 1), y);
}

inline std::vector<double> true_joint_density(const GaussianMixtureSpec& spec,
                                              std::span<const double> x) {
  std::vector<double> out(spec.num_classes());
  for (std::size_t y = 0; y < out.size(); ++y) out[y] = true_density(spec, x, y);
  return out;
}

/// Marginal CDF of a one-dimensional mixture.
inline double mixture_cdf(const GaussianMixtureSpec& spec, double x) {
  double f = 0.0;
  for (const auto& c : spec.components) f += c.prior * normal_cdf((x - c.mean[0]) / c.stddev[0]);
  return f;
}

enum class BinScheme {
  // Each grid point owns the cell between the midpoints to its neighbours;
  // the end cells extend half a spacing outward.
  centered_cells,
  // Every point gets the same width; mass is proportional to density.
  uniform_width,
};

/// Bin mass = density at the grid point x cell width, renormalized to 1.
inline tabular::JointTable discretize(const GaussianMixtureSpec& spec, std::span<const double> grid,
                                      BinScheme scheme = BinScheme::centered_cells) {
  spec.validate();
  if (spec.data_dim != 1) throw InvalidSpec("discretize needs a one-dimensional mixture");
  if (grid.size() < 2) throw DegenerateGrid("grid needs at least two points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw DegenerateGrid("grid must be strictly increasing");

  const std::size_t n = grid.size(), k = spec.num_classes();
  std::vector<double> w(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double width = 1.0;
    if (scheme == BinScheme::centered_cells) {
      const double left = i == 0 ? grid[1] - grid[0] : grid[i] - grid[i - 1];
      const double right = i + 1 == n ? grid[n - 1] - grid[n - 2] : grid[i + 1] - grid[i];
      width = 0.5 * (left + right);
    }
    for (std::size_t y = 0; y < k; ++y) w[i * k + y] = true_density(spec, grid[i], y) * width;
  }
  return tabular::JointTable::from_weights(n, k, std::move(w));
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

}  // namespace adclab::synth
