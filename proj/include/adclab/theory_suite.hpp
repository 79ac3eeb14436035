#pragma once

// Numerical verification of the tabular identities: random table sweeps for
// the four generator-objective identities, perturbation tests of every
// closed-form optimum, the projection-logit decomposition, and fixed
// boundary cases. Failures are reported, never thrown.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adclab/format.hpp"
#include "adclab/rng.hpp"
#include "adclab/tabular.hpp"

namespace adclab {

struct TheoryCheck {
  std::string name;
  std::size_t trials = 0;
  double worst = 0.0;
  double threshold = 0.0;
  // true: pass when worst <= threshold; false: pass when worst >= threshold
  bool upper_bound = true;
  bool pass = true;
};

struct TheoryReport {
  std::vector<TheoryCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
  }
  const TheoryCheck& find(std::string_view name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw MissingData("no check named " + std::string(name));
  }

  std::string csv() const {
    std::string s = "check,trials,worst,threshold,pass\n";
    for (const auto& c : checks)
      s += c.name + "," + std::to_string(c.trials) + "," + format_double(c.worst) + "," +
           format_double(c.threshold) + "," + (c.pass ? "true" : "false") + "\n";
    return s;
  }
};

namespace theory_detail {

class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, double threshold, bool upper_bound)
      : check_{std::move(name), 0,
               upper_bound ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity(),
               threshold, upper_bound, true} {}

  void add(double v) {
    ++check_.trials;
    if (std::isnan(v)) {
      check_.worst = v;
      nan_ = true;
      return;
    }
    if (nan_) return;
    check_.worst = check_.upper_bound ? std::max(check_.worst, v) : std::min(check_.worst, v);
  }

  void fail(std::size_t count = 1) {
    check_.trials += count;
    forced_fail_ = true;
  }

  TheoryCheck done() {
    check_.pass = !nan_ && !forced_fail_ && check_.trials > 0 &&
                  (check_.upper_bound ? check_.worst <= check_.threshold
                                      : check_.worst >= check_.threshold);
    return check_;
  }

 private:
  TheoryCheck check_;
  bool nan_ = false;
  bool forced_fail_ = false;
};

// Largest relative gain of a perturbed classifier over the optimum.
inline double perturbation_gain(const std::function<double(const tabular::ClassifierTable&)>& obj,
                                const tabular::ClassifierTable& opt, Rng& rng,
                                std::size_t perturbations, double scale) {
  const double best = obj(opt);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < perturbations; ++i) {
    const double v = obj(tabular::perturb_rows(opt, rng, scale));
    worst = std::max(worst, (v - best) / std::max(1.0, std::abs(best)));
  }
  return worst;
}

inline tabular::ClassifierTable as_two_column(std::span<const double> d) {
  tabular::ClassifierTable t(d.size(), 2);
  for (std::size_t x = 0; x < d.size(); ++x) {
    t(x, 0) = d[x];
    t(x, 1) = 1.0 - d[x];
  }
  return t;
}

}  // namespace theory_detail

struct TheorySuiteOptions {
  std::size_t trials = 1000;
  std::size_t max_points = 8;
  std::size_t max_classes = 5;
  std::uint64_t seed = 0;
  std::size_t perturbations = 100;  // per table for the optimality checks
  double perturbation_scale = 0.5;
  double identity_tolerance = 1e-10;
  double bound_tolerance = -1e-12;
  double equality_tolerance = 1e-12;
  double optimality_tolerance = 1e-12;
};

/// Table sizes are drawn uniformly from [1, max_points] x [2, max_classes].
inline TheoryReport verify_theory_suite(const TheorySuiteOptions& opt = {}) {
  using namespace tabular;
  if (opt.trials == 0) throw InvalidSpec("trials must be >= 1");
  if (opt.max_points == 0 || opt.max_classes < 2)
    throw InvalidSpec("need max_points >= 1 and max_classes >= 2");

  Rng rng(opt.seed);
  theory_detail::CheckAccumulator thm1("thm1", opt.identity_tolerance, true);
  theory_detail::CheckAccumulator thm2("thm2", opt.identity_tolerance, true);
  theory_detail::CheckAccumulator thm3("thm3", opt.identity_tolerance, true);
  theory_detail::CheckAccumulator amgan("amgan_bound", opt.bound_tolerance, false);
  theory_detail::CheckAccumulator eq_thm1("thm1_q_eq_p", opt.equality_tolerance, true);
  theory_detail::CheckAccumulator eq_thm2("thm2_q_eq_p", opt.equality_tolerance, true);
  theory_detail::CheckAccumulator eq_thm3("thm3_q_eq_p", opt.equality_tolerance, true);
  theory_detail::CheckAccumulator eq_amgan("amgan_bound_q_eq_p", opt.equality_tolerance, true);
  theory_detail::CheckAccumulator opt_c("optimal_classifier", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator opt_c_orig("optimal_classifier_original", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator opt_cd("optimal_discriminative_classifier", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator opt_twin("optimal_twin_classifiers", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator opt_d("optimal_discriminator", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator opt_dext("optimal_label_extended", opt.optimality_tolerance, true);
  theory_detail::CheckAccumulator pd("pd_decomposition", opt.equality_tolerance, true);

  const auto guarded = [](theory_detail::CheckAccumulator& acc, const auto& f) {
    try {
      acc.add(f());
    } catch (const Error&) {
      acc.fail();
    }
  };

  for (std::size_t t = 0; t < opt.trials; ++t) {
    const std::size_t n = 1 + rng.index(opt.max_points);
    const std::size_t k = 2 + rng.index(opt.max_classes - 1);
    const JointTable p = random_joint_table(n, k, rng);
    const JointTable q = random_joint_table(n, k, rng);

    guarded(thm1, [&] { return verify_theorem(TheoremId::thm1, p, q); });
    guarded(thm2, [&] { return verify_theorem(TheoremId::thm2, p, q); });
    guarded(thm3, [&] { return verify_theorem(TheoremId::thm3, p, q); });
    guarded(amgan, [&] { return verify_theorem(TheoremId::amgan_bound, p, q); });
    guarded(eq_thm1, [&] { return verify_theorem(TheoremId::thm1, p, p); });
    guarded(eq_thm2, [&] { return verify_theorem(TheoremId::thm2, p, p); });
    guarded(eq_thm3, [&] { return verify_theorem(TheoremId::thm3, p, p); });
    guarded(eq_amgan, [&] { return std::abs(verify_theorem(TheoremId::amgan_bound, p, p)); });

    const std::size_t m = opt.perturbations;
    const double s = opt.perturbation_scale;
    guarded(opt_c, [&] {
      return theory_detail::perturbation_gain([&](const auto& c) { return classifier_objective(p, c); },
                                       optimal_classifier_acgan(p), rng, m, s);
    });
    guarded(opt_c_orig, [&] {
      return theory_detail::perturbation_gain(
          [&](const auto& c) { return classifier_objective_original(p, q, c); },
          optimal_classifier_acgan_original(p, q), rng, m, s);
    });
    guarded(opt_cd, [&] {
      return theory_detail::perturbation_gain(
          [&](const auto& c) { return discriminative_classifier_objective(p, q, c); },
          optimal_discriminative_classifier(p, q), rng, m, s);
    });
    guarded(opt_twin, [&] {
      const auto [c, c_mi] = optimal_twin_classifiers(p, q);
      const double a = theory_detail::perturbation_gain(
          [&](const auto& x) { return twin_classifier_objective(p, q, x, c_mi); }, c, rng, m, s);
      const double b = theory_detail::perturbation_gain(
          [&](const auto& x) { return twin_classifier_objective(p, q, c, x); }, c_mi, rng, m, s);
      return std::max(a, b);
    });
    guarded(opt_d, [&] {
      const auto d = theory_detail::as_two_column(optimal_discriminator(p, q));
      return theory_detail::perturbation_gain(
          [&](const auto& c) {
            std::vector<double> col(c.num_points());
            for (std::size_t x = 0; x < col.size(); ++x) col[x] = c(x, 0);
            return discriminator_objective(p, q, col);
          },
          d, rng, m, s);
    });
    guarded(opt_dext, [&] {
      return theory_detail::perturbation_gain(
          [&](const auto& c) { return label_extended_objective(p, q, c); },
          optimal_label_extended(p, q), rng, m, s);
    });
    guarded(pd, [&] {
      double worst = 0.0;
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < k; ++y) {
          const auto l = optimal_pd_logit(p, q, x, y);
          worst = std::max(worst, std::abs(l.d_star - (l.r_x + l.r_y_given_x)));
        }
      return worst;
    });
  }

  TheoryReport report;
  for (auto* acc : {&thm1, &thm2, &thm3, &amgan, &eq_thm1, &eq_thm2, &eq_thm3, &eq_amgan, &opt_c,
                    &opt_c_orig, &opt_cd, &opt_twin, &opt_d, &opt_dext, &pd})
    report.checks.push_back(acc->done());

  // Mismatched pair: p(x,y) = q(x,y) = 0 with p(x) + q(x) > 0. The projection
  // logit is undefined there, the discriminative classifier assigns 0.
  {
    const JointTable p(2, 2, {0.5, 0.0, 0.25, 0.25});
    const JointTable q(2, 2, {0.4, 0.0, 0.3, 0.3});
    bool pd_undefined = false;
    try {
      (void)optimal_pd_logit(p, q, 0, 1);
    } catch (const UndefinedPair&) {
      pd_undefined = true;
    }
    const auto cd = optimal_discriminative_classifier(p, q);
    const double plus = cd(0, 1);
    report.checks.push_back(
        {"mismatched_pair", 1, pd_undefined ? plus : 1.0, 0.0, true, pd_undefined && plus == 0.0});
  }

  // Generator objective with lambda = 1 and no adversarial term reduces to
  // KL(Q || P) for the discriminative-classifier method.
  {
    theory_detail::CheckAccumulator table1("adc_objective_is_kl", opt.identity_tolerance, true);
    Rng trng(opt.seed ^ 0x5eedULL);
    for (std::size_t t = 0; t < std::min<std::size_t>(opt.trials, 100); ++t) {
      const JointTable p = random_joint_table(1 + trng.index(opt.max_points), 3, trng);
      const JointTable q = random_joint_table(p.num_points(), 3, trng);
      table1.add(std::abs(generator_objective(MethodId::adcgan, p, q, 1.0, false) - kl(q, p)));
    }
    report.checks.push_back(table1.done());
  }
  return report;
}

}  // namespace adclab
