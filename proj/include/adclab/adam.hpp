#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adclab/autodiff.hpp"
#include "adclab/errors.hpp"

namespace adclab {

struct AdamHyper {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment accumulators mirroring a parameter group.
struct OptimizerState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::uint64_t t = 0;

  static OptimizerState for_params(std::span<ad::Tensor* const> params) {
    OptimizerState s;
    for (const ad::Tensor* p : params) {
      s.m.push_back(ad::Tensor::zeros_like(*p));
      s.v.push_back(ad::Tensor::zeros_like(*p));
    }
    return s;
  }
};

/// One bias-corrected Adam update. Gradients are checked before anything is
/// touched, so a non-finite gradient leaves state and parameters unchanged.
inline void adam_step(OptimizerState& state, std::span<ad::Tensor* const> params,
                      std::span<const ad::Tensor* const> grads, const AdamHyper& h) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeMismatch("optimizer group of " + std::to_string(state.m.size()) +
                        " tensors got " + std::to_string(params.size()) + " params and " +
                        std::to_string(grads.size()) + " grads");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape())
      throw ShapeMismatch("tensor " + std::to_string(i) + ": param " +
                          ad::shape_string(params[i]->shape()) + " grad " +
                          ad::shape_string(grads[i]->shape()));
    for (double g : grads[i]->data())
      if (!std::isfinite(g)) throw NonFiniteGradient("tensor " + std::to_string(i));
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = h.beta1 * m[j] + (1.0 - h.beta1) * g[j];
      v[j] = h.beta2 * v[j] + (1.0 - h.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      p[j] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
    }
  }
}

}  // namespace adclab
