#pragma once

// Exact discrete joint distributions p(x,y) over a finite support, the
// divergences between them, the closed-form optimal discriminators and
// classifiers of each conditional-GAN family, and the generator objectives
// those optima induce.
//
// All logarithms are natural; 0 log 0 is taken as 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adclab/errors.hpp"
#include "adclab/rng.hpp"

namespace adclab {

enum class MethodId { acgan, acgan_original, tacgan, adcgan, pdgan, amgan };

inline std::string_view to_string(MethodId m) {
  switch (m) {
    case MethodId::acgan: return "acgan";
    case MethodId::acgan_original: return "acgan_original";
    case MethodId::tacgan: return "tacgan";
    case MethodId::adcgan: return "adcgan";
    case MethodId::pdgan: return "pdgan";
    case MethodId::amgan: return "amgan";
  }
  return "?";
}

inline MethodId parse_method(std::string_view name) {
  for (auto m : {MethodId::acgan, MethodId::acgan_original, MethodId::tacgan,
                 MethodId::adcgan, MethodId::pdgan, MethodId::amgan}) {
    if (to_string(m) == name) return m;
  }
  throw InvalidSpec("unknown method '" + std::string(name) + "'");
}

}  // namespace adclab

namespace adclab::tabular {

inline constexpr double kMassTolerance = 1e-12;

/// Joint probability table p(x,y), num_points rows by num_classes columns,
/// row-major. Marginals are always recomputed from the cells.
class JointTable {
 public:
  JointTable(std::size_t num_points, std::size_t num_classes, std::vector<double> probs)
      : points_(num_points), classes_(num_classes), probs_(std::move(probs)) {
    if (points_ == 0 || classes_ == 0) throw InvalidTable("empty support");
    if (probs_.size() != points_ * classes_)
      throw InvalidTable("expected " + std::to_string(points_ * classes_) + " cells, got " +
                         std::to_string(probs_.size()));
    double total = 0.0;
    for (double v : probs_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidTable("negative or non-finite cell");
      total += v;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
      throw InvalidTable("cells sum to " + std::to_string(total));
  }

  /// Normalizes nonnegative weights into a table.
  static JointTable from_weights(std::size_t num_points, std::size_t num_classes,
                                 std::vector<double> weights) {
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidTable("negative or non-finite weight");
      total += w;
    }
    if (!(total > 0.0)) throw InvalidTable("weights sum to zero");
    for (double& w : weights) w /= total;
    return JointTable(num_points, num_classes, std::move(weights));
  }

  std::size_t num_points() const { return points_; }
  std::size_t num_classes() const { return classes_; }
  std::size_t size() const { return probs_.size(); }

  double operator()(std::size_t x, std::size_t y) const { return probs_[x * classes_ + y]; }
  std::span<const double> probs() const { return probs_; }
  std::span<const double> row(std::size_t x) const {
    return std::span<const double>(probs_).subspan(x * classes_, classes_);
  }

  double marginal_x(std::size_t x) const {
    const auto r = row(x);
    return std::accumulate(r.begin(), r.end(), 0.0);
  }
  std::vector<double> marginal_x() const {
    std::vector<double> m(points_);
    for (std::size_t x = 0; x < points_; ++x) m[x] = marginal_x(x);
    return m;
  }
  std::vector<double> marginal_y() const {
    std::vector<double> m(classes_, 0.0);
    for (std::size_t x = 0; x < points_; ++x)
      for (std::size_t y = 0; y < classes_; ++y) m[y] += (*this)(x, y);
    return m;
  }

  bool same_shape(const JointTable& o) const {
    return points_ == o.points_ && classes_ == o.classes_;
  }

 private:
  std::size_t points_;
  std::size_t classes_;
  std::vector<double> probs_;
};

/// Per-point conditional distribution over `outputs` labels. Rows for points
/// without support are flagged undefined and hold zeros.
class ClassifierTable {
 public:
  ClassifierTable(std::size_t num_points, std::size_t outputs)
      : points_(num_points), outputs_(outputs), probs_(num_points * outputs, 0.0),
        defined_(num_points, 1) {}

  std::size_t num_points() const { return points_; }
  std::size_t num_outputs() const { return outputs_; }

  double& operator()(std::size_t x, std::size_t j) { return probs_[x * outputs_ + j]; }
  double operator()(std::size_t x, std::size_t j) const { return probs_[x * outputs_ + j]; }

  std::span<double> row(std::size_t x) {
    return std::span<double>(probs_).subspan(x * outputs_, outputs_);
  }
  std::span<const double> row(std::size_t x) const {
    return std::span<const double>(probs_).subspan(x * outputs_, outputs_);
  }

  bool defined(std::size_t x) const { return defined_[x] != 0; }
  void set_undefined(std::size_t x) {
    defined_[x] = 0;
    for (double& v : row(x)) v = 0.0;
  }

 private:
  std::size_t points_;
  std::size_t outputs_;
  std::vector<double> probs_;
  std::vector<char> defined_;
};

// ---------------------------------------------------------------------------
// Divergences

inline void require_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeMismatch("distributions of size " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
}

/// KL(a || b) = sum over a>0 of a log(a/b).
inline double kl(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] <= 0.0) continue;
    if (b[i] <= 0.0)
      throw AbsoluteContinuityViolation("a > 0 where b = 0 at cell " + std::to_string(i));
    s += a[i] * std::log(a[i] / b[i]);
  }
  return s;
}

inline double kl(const JointTable& a, const JointTable& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("joint tables differ in shape");
  return kl(a.probs(), b.probs());
}

/// Jensen-Shannon divergence against the midpoint mixture.
inline double js(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b);
  std::vector<double> m(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) m[i] = 0.5 * (a[i] + b[i]);
  return 0.5 * kl(a, m) + 0.5 * kl(b, m);
}

inline double js(const JointTable& a, const JointTable& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("joint tables differ in shape");
  return js(a.probs(), b.probs());
}

/// H_Q(Y|X) = -sum q(x,y) log q(y|x).
inline double conditional_entropy(const JointTable& q) {
  double h = 0.0;
  for (std::size_t x = 0; x < q.num_points(); ++x) {
    const double qx = q.marginal_x(x);
    for (std::size_t y = 0; y < q.num_classes(); ++y) {
      const double v = q(x, y);
      if (v > 0.0) h -= v * std::log(v / qx);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Closed-form optima

/// Auxiliary classifier trained on real data only: C*(y|x) = p(x,y)/p(x).
inline ClassifierTable optimal_classifier_acgan(const JointTable& p) {
  ClassifierTable c(p.num_points(), p.num_classes());
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double px = p.marginal_x(x);
    if (px <= 0.0) {
      c.set_undefined(x);
      continue;
    }
    for (std::size_t y = 0; y < p.num_classes(); ++y) c(x, y) = p(x, y) / px;
  }
  return c;
}

/// Classifier trained on real and generated data alike:
/// C*(y|x) = (p(x,y)+q(x,y)) / (p(x)+q(x)). Rows without support are flagged.
inline ClassifierTable optimal_classifier_acgan_original(const JointTable& p, const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  ClassifierTable c(p.num_points(), p.num_classes());
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double mass = p.marginal_x(x) + q.marginal_x(x);
    if (mass <= 0.0) {
      c.set_undefined(x);
      continue;
    }
    for (std::size_t y = 0; y < p.num_classes(); ++y) c(x, y) = (p(x, y) + q(x, y)) / mass;
  }
  return c;
}

/// 2K-way discriminative classifier. Columns [0,K) are "real with label y",
/// columns [K,2K) are "generated with label y".
inline ClassifierTable optimal_discriminative_classifier(const JointTable& p, const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  const std::size_t k = p.num_classes();
  ClassifierTable c(p.num_points(), 2 * k);
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double mass = p.marginal_x(x) + q.marginal_x(x);
    if (mass <= 0.0) throw UndefinedRow("p(x)+q(x) = 0 at point " + std::to_string(x));
    for (std::size_t y = 0; y < k; ++y) {
      c(x, y) = p(x, y) / mass;
      c(x, k + y) = q(x, y) / mass;
    }
  }
  return c;
}

/// Twin classifiers: C on real data, C_mi on generated data.
inline std::pair<ClassifierTable, ClassifierTable> optimal_twin_classifiers(const JointTable& p,
                                                                            const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  ClassifierTable c(p.num_points(), p.num_classes());
  ClassifierTable c_mi(p.num_points(), p.num_classes());
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double px = p.marginal_x(x);
    const double qx = q.marginal_x(x);
    if (px <= 0.0 || qx <= 0.0)
      throw UndefinedRow("zero marginal at point " + std::to_string(x));
    for (std::size_t y = 0; y < p.num_classes(); ++y) {
      c(x, y) = p(x, y) / px;
      c_mi(x, y) = q(x, y) / qx;
    }
  }
  return {std::move(c), std::move(c_mi)};
}

/// D*(x) = p(x) / (p(x)+q(x)).
inline std::vector<double> optimal_discriminator(const JointTable& p, const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  std::vector<double> d(p.num_points());
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double px = p.marginal_x(x);
    const double mass = px + q.marginal_x(x);
    if (mass <= 0.0) throw UndefinedRow("p(x)+q(x) = 0 at point " + std::to_string(x));
    d[x] = px / mass;
  }
  return d;
}

/// (K+1)-way label-extended discriminator; column 0 is the fake class and
/// column y+1 is real class y.
inline ClassifierTable optimal_label_extended(const JointTable& p, const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  const std::size_t k = p.num_classes();
  ClassifierTable d(p.num_points(), k + 1);
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    const double qx = q.marginal_x(x);
    const double mass = p.marginal_x(x) + qx;
    if (mass <= 0.0) throw UndefinedRow("p(x)+q(x) = 0 at point " + std::to_string(x));
    d(x, 0) = qx / mass;
    for (std::size_t y = 0; y < k; ++y) d(x, y + 1) = p(x, y) / mass;
  }
  return d;
}

/// Optimal projection-discriminator logit and its marginal/conditional split.
struct PdLogit {
  double r_x;          // log p(x)/q(x)
  double r_y_given_x;  // log p(y|x)/q(y|x)
  double d_star;       // log p(x,y)/q(x,y)
};

inline PdLogit optimal_pd_logit(const JointTable& p, const JointTable& q, std::size_t x,
                                std::size_t y) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  if (x >= p.num_points() || y >= p.num_classes())
    throw ShapeMismatch("pair (" + std::to_string(x) + "," + std::to_string(y) + ") out of range");
  const double pxy = p(x, y);
  const double qxy = q(x, y);
  if (pxy <= 0.0 && qxy <= 0.0)
    throw UndefinedPair("p(x,y) = q(x,y) = 0 at (" + std::to_string(x) + "," +
                        std::to_string(y) + ")");
  const double px = p.marginal_x(x);
  const double qx = q.marginal_x(x);
  PdLogit out{};
  out.d_star = std::log(pxy) - std::log(qxy);
  out.r_x = std::log(px) - std::log(qx);
  out.r_y_given_x = (std::log(pxy) - std::log(px)) - (std::log(qxy) - std::log(qx));
  return out;
}

// ---------------------------------------------------------------------------
// Training objectives of the discriminators/classifiers (to be maximized).
// These are what the closed forms above maximize; the perturbation oracle
// compares against them.

namespace detail {
// a * log(b) with 0 log anything = 0 and a>0, b=0 giving -inf.
inline double weighted_log(double a, double b) {
  if (a <= 0.0) return 0.0;
  if (b <= 0.0) return -std::numeric_limits<double>::infinity();
  return a * std::log(b);
}
}  // namespace detail

inline double classifier_objective(const JointTable& p, const ClassifierTable& c) {
  double s = 0.0;
  for (std::size_t x = 0; x < p.num_points(); ++x)
    for (std::size_t y = 0; y < p.num_classes(); ++y) s += detail::weighted_log(p(x, y), c(x, y));
  return s;
}

/// E_P log C + E_Q log C, the original AC-GAN classifier task.
inline double classifier_objective_original(const JointTable& p, const JointTable& q,
                                            const ClassifierTable& c) {
  return classifier_objective(p, c) + classifier_objective(q, c);
}

inline double discriminative_classifier_objective(const JointTable& p, const JointTable& q,
                                                  const ClassifierTable& cd) {
  const std::size_t k = p.num_classes();
  double s = 0.0;
  for (std::size_t x = 0; x < p.num_points(); ++x)
    for (std::size_t y = 0; y < k; ++y)
      s += detail::weighted_log(p(x, y), cd(x, y)) + detail::weighted_log(q(x, y), cd(x, k + y));
  return s;
}

inline double twin_classifier_objective(const JointTable& p, const JointTable& q,
                                        const ClassifierTable& c, const ClassifierTable& c_mi) {
  return classifier_objective(p, c) + classifier_objective(q, c_mi);
}

inline double discriminator_objective(const JointTable& p, const JointTable& q,
                                      std::span<const double> d) {
  double s = 0.0;
  for (std::size_t x = 0; x < p.num_points(); ++x)
    s += detail::weighted_log(p.marginal_x(x), d[x]) +
         detail::weighted_log(q.marginal_x(x), 1.0 - d[x]);
  return s;
}

inline double label_extended_objective(const JointTable& p, const JointTable& q,
                                       const ClassifierTable& d) {
  double s = 0.0;
  for (std::size_t x = 0; x < p.num_points(); ++x) {
    s += detail::weighted_log(q.marginal_x(x), d(x, 0));
    for (std::size_t y = 0; y < p.num_classes(); ++y)
      s += detail::weighted_log(p(x, y), d(x, y + 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Generator objectives under the optimal discriminator/classifier

struct Divergences {
  double js_marginal;
  double js_joint;
  double kl_joint;     // KL(Q_{X,Y} || P_{X,Y})
  double kl_marginal;  // KL(Q_X || P_X)
  double cond_entropy; // H_Q(Y|X)
};

inline Divergences divergences(const JointTable& p, const JointTable& q) {
  if (!p.same_shape(q)) throw ShapeMismatch("joint tables differ in shape");
  const auto px = p.marginal_x();
  const auto qx = q.marginal_x();
  return Divergences{js(px, qx), js(p, q), kl(q, p), kl(qx, px), conditional_entropy(q)};
}

/// -E_Q[log C*(y|x)] for the classifier trained on both real and generated
/// data. Finite whenever q is a valid table.
inline double original_acgan_classifier_term(const JointTable& p, const JointTable& q) {
  const auto c = optimal_classifier_acgan_original(p, q);
  double s = 0.0;
  for (std::size_t x = 0; x < q.num_points(); ++x)
    for (std::size_t y = 0; y < q.num_classes(); ++y) s -= detail::weighted_log(q(x, y), c(x, y));
  return s;
}

/// The theoretical generator objective of each method. With include_js false
/// the adversarial JS term is dropped (the "without V(G,D)" setting). The
/// projection method has no separate classifier term, so its joint JS is
/// returned either way.
inline double generator_objective(MethodId method, const JointTable& p, const JointTable& q,
                                  double lambda, bool include_js) {
  const auto d = divergences(p, q);
  const double js_term = include_js ? d.js_marginal : 0.0;
  switch (method) {
    case MethodId::acgan:
      return js_term + lambda * (d.kl_joint - d.kl_marginal + d.cond_entropy);
    case MethodId::acgan_original:
      return js_term + lambda * original_acgan_classifier_term(p, q);
    case MethodId::tacgan:
      return js_term + lambda * (d.kl_joint - d.kl_marginal);
    case MethodId::adcgan:
      return js_term + lambda * d.kl_joint;
    case MethodId::pdgan:
      return d.js_joint;
    case MethodId::amgan:
      return js_term + d.kl_joint - 0.5 * d.kl_marginal + d.cond_entropy + std::numbers::ln2;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Identity checks

enum class TheoremId { thm1, thm2, thm3, amgan_bound };

inline std::string_view to_string(TheoremId t) {
  switch (t) {
    case TheoremId::thm1: return "thm1";
    case TheoremId::thm2: return "thm2";
    case TheoremId::thm3: return "thm3";
    case TheoremId::amgan_bound: return "amgan_bound";
  }
  return "?";
}

namespace detail {
// E_Q[log c(j(y)|x)] over cells with q > 0; throws if c vanishes on Q's support.
template <typename ColumnOf>
double expected_log(const JointTable& q, const ClassifierTable& c, ColumnOf column) {
  double s = 0.0;
  for (std::size_t x = 0; x < q.num_points(); ++x)
    for (std::size_t y = 0; y < q.num_classes(); ++y) {
      const double w = q(x, y);
      if (w <= 0.0) continue;
      const double v = c(x, column(y));
      if (v <= 0.0)
        throw AbsoluteContinuityViolation("classifier vanishes on generated support at (" +
                                          std::to_string(x) + "," + std::to_string(y) + ")");
      s += w * std::log(v);
    }
  return s;
}
}  // namespace detail

/// Residual of each identity. For thm1-thm3 the residual is an absolute
/// difference that should vanish; for amgan_bound it is (lhs - bound), which
/// must be nonnegative.
inline double verify_theorem(TheoremId id, const JointTable& p, const JointTable& q) {
  const auto d = divergences(p, q);
  const auto same = [](std::size_t y) { return y; };
  switch (id) {
    case TheoremId::thm1: {
      const auto c = optimal_classifier_acgan(p);
      const double lhs = detail::expected_log(q, c, same);
      return std::abs(lhs + (d.kl_joint - d.kl_marginal + d.cond_entropy));
    }
    case TheoremId::thm2: {
      const auto cd = optimal_discriminative_classifier(p, q);
      const std::size_t k = p.num_classes();
      const double plus = detail::expected_log(q, cd, same);
      const double minus = detail::expected_log(q, cd, [k](std::size_t y) { return k + y; });
      return std::abs(plus - minus + d.kl_joint);
    }
    case TheoremId::thm3: {
      const auto [c, c_mi] = optimal_twin_classifiers(p, q);
      const double lhs = detail::expected_log(q, c, same) - detail::expected_log(q, c_mi, same);
      return std::abs(lhs + d.kl_joint - d.kl_marginal);
    }
    case TheoremId::amgan_bound: {
      const auto dp = optimal_label_extended(p, q);
      const double lhs = -detail::expected_log(q, dp, [](std::size_t y) { return y + 1; });
      return lhs - (d.kl_joint - 0.5 * d.kl_marginal + d.cond_entropy + std::numbers::ln2);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Brute-force minimization over a finite family of generated tables

struct FamilyArgmin {
  std::size_t index;
  double value;
};

inline FamilyArgmin argmin_over_family(MethodId method, const JointTable& p,
                                       std::span<const JointTable> family, double lambda,
                                       bool include_js) {
  if (family.empty()) throw EmptyFamily("no candidate tables");
  FamilyArgmin best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double v = generator_objective(method, p, family[i], lambda, include_js);
    if (v < best.value) best = {i, v};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Random tables and perturbations for property sweeps

/// Entries uniform on (eps, 1], then normalized; strictly positive.
inline JointTable random_joint_table(std::size_t num_points, std::size_t num_classes, Rng& rng,
                                     double eps = 1e-3) {
  std::vector<double> w(num_points * num_classes);
  for (double& v : w) v = eps + (1.0 - eps) * rng.uniform();
  return JointTable::from_weights(num_points, num_classes, std::move(w));
}

/// Multiplies each entry by exp(scale * N(0,1)) and renormalizes each defined
/// row. Zero entries stay zero.
inline ClassifierTable perturb_rows(const ClassifierTable& c, Rng& rng, double scale) {
  ClassifierTable out = c;
  for (std::size_t x = 0; x < c.num_points(); ++x) {
    if (!c.defined(x)) continue;
    auto r = out.row(x);
    double total = 0.0;
    for (double& v : r) {
      v *= std::exp(scale * rng.normal());
      total += v;
    }
    if (total > 0.0)
      for (double& v : r) v /= total;
  }
  return out;
}

}  // namespace adclab::tabular
