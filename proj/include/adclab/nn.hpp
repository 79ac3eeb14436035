#pragma once

// Networks of the toy conditional GANs: a conditional generator G(z, y), a
// feature extractor phi shared by every discriminator/classifier head, the
// unconditional head psi, and the label embeddings for real (plus) and
// generated (minus) data.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adclab/autodiff.hpp"
#include "adclab/errors.hpp"
#include "adclab/rng.hpp"

namespace adclab::nn {

inline constexpr double kLeakySlope = 0.2;

struct DenseLayer {
  ad::Tensor weight;  // out x in
  ad::Tensor bias;    // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
};

struct NetDims {
  std::size_t latent_dim = 4;
  std::size_t data_dim = 1;
  std::size_t feature_dim = 32;
  std::size_t num_classes = 3;
  std::vector<std::size_t> hidden = {64, 64};
};

struct NamedTensor {
  std::string name;
  ad::Tensor* tensor;
};

struct ModelParams {
  NetDims dims;
  std::vector<DenseLayer> generator;  // leaky hidden layers, linear output
  std::vector<DenseLayer> phi;        // leaky after every layer
  DenseLayer psi;                     // feature_dim -> 1
  ad::Tensor emb_plus;                // K x d
  ad::Tensor emb_minus;               // K x d
  ad::Tensor emb_extended;            // (K+1) x d, row 0 is the fake class

  /// Generator tensors first, then discriminator-side tensors; the order is
  /// fixed and shared by tapes, optimizers and checkpoints.
  std::vector<NamedTensor> tensors() {
    std::vector<NamedTensor> out;
    const auto add_mlp = [&out](std::vector<DenseLayer>& mlp, const std::string& prefix) {
      for (std::size_t i = 0; i < mlp.size(); ++i) {
        out.push_back({prefix + "." + std::to_string(i) + ".weight", &mlp[i].weight});
        out.push_back({prefix + "." + std::to_string(i) + ".bias", &mlp[i].bias});
      }
    };
    add_mlp(generator, "generator");
    add_mlp(phi, "phi");
    out.push_back({"psi.weight", &psi.weight});
    out.push_back({"psi.bias", &psi.bias});
    out.push_back({"emb_plus", &emb_plus});
    out.push_back({"emb_minus", &emb_minus});
    out.push_back({"emb_extended", &emb_extended});
    return out;
  }

  std::size_t num_generator_tensors() const { return 2 * generator.size(); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    const auto eq_layers = [](const std::vector<DenseLayer>& x, const std::vector<DenseLayer>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (!(x[i].weight == y[i].weight) || !(x[i].bias == y[i].bias)) return false;
      return true;
    };
    return eq_layers(a.generator, b.generator) && eq_layers(a.phi, b.phi) &&
           a.psi.weight == b.psi.weight && a.psi.bias == b.psi.bias &&
           a.emb_plus == b.emb_plus && a.emb_minus == b.emb_minus &&
           a.emb_extended == b.emb_extended;
  }
};

/// Glorot-normal matrix, N(0, 2/(fan_in+fan_out)).
inline ad::Tensor glorot_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  ad::Tensor t(ad::Shape{rows, cols});
  const double sd = std::sqrt(2.0 / static_cast<double>(rows + cols));
  for (double& v : t.data()) v = sd * rng.normal();
  return t;
}

inline DenseLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  return DenseLayer{glorot_normal(out, in, rng), ad::Tensor(ad::Shape{out})};
}

inline ModelParams init_params(const NetDims& dims, std::uint64_t seed) {
  if (dims.latent_dim == 0 || dims.data_dim == 0 || dims.feature_dim == 0 ||
      dims.num_classes == 0)
    throw InvalidSpec("network dimensions must be positive");
  for (auto h : dims.hidden)
    if (h == 0) throw InvalidSpec("hidden sizes must be positive");

  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  std::size_t in = dims.latent_dim + dims.num_classes;
  for (auto h : dims.hidden) {
    p.generator.push_back(make_layer(in, h, rng));
    in = h;
  }
  p.generator.push_back(make_layer(in, dims.data_dim, rng));

  in = dims.data_dim;
  for (auto h : dims.hidden) {
    p.phi.push_back(make_layer(in, h, rng));
    in = h;
  }
  p.phi.push_back(make_layer(in, dims.feature_dim, rng));

  p.psi = make_layer(dims.feature_dim, 1, rng);
  p.emb_plus = glorot_normal(dims.num_classes, dims.feature_dim, rng);
  p.emb_minus = glorot_normal(dims.num_classes, dims.feature_dim, rng);
  p.emb_extended = glorot_normal(dims.num_classes + 1, dims.feature_dim, rng);
  return p;
}

/// Outputs of the shared feature extractor and every head built on it.
struct Heads {
  ad::NodeId features;      // batch x d
  ad::NodeId disc_logit;    // batch x 1, psi(phi(x))
  ad::NodeId class_plus;    // batch x K, phi+ . phi(x)
  ad::NodeId class_minus;   // batch x K, phi- . phi(x)
  ad::NodeId extended;      // batch x (K+1)
};

/// ModelParams recorded as tape leaves, plus the forward builders.
class BoundModel {
 public:
  BoundModel(ad::Tape& tape, ModelParams& params) : tape_(tape), params_(params) {
    for (auto& nt : params_.tensors()) leaves_.push_back(tape_.leaf(*nt.tensor));
  }

  ad::Tape& tape() const { return tape_; }
  const ModelParams& params() const { return params_; }
  std::span<const ad::NodeId> leaves() const { return leaves_; }
  std::size_t phi_evaluations() const { return phi_evaluations_; }

  void check_labels(std::span<const std::size_t> labels) const {
    for (auto y : labels)
      if (y >= params_.dims.num_classes)
        throw LabelOutOfRange("label " + std::to_string(y) + " with " +
                              std::to_string(params_.dims.num_classes) + " classes");
  }

  /// G(z, y) with y fed as a one-hot vector concatenated to z.
  ad::NodeId generate(const ad::Tensor& z, std::span<const std::size_t> labels) {
    const auto& d = params_.dims;
    if (z.rank() != 2 || z.cols() != d.latent_dim || z.rows() != labels.size())
      throw ShapeMismatch("latent batch " + ad::shape_string(z.shape()) + " for " +
                          std::to_string(labels.size()) + " labels and latent_dim " +
                          std::to_string(d.latent_dim));
    check_labels(labels);
    ad::Tensor onehot(ad::Shape{labels.size(), d.num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) onehot.at(i, labels[i]) = 1.0;
    ad::NodeId h = tape_.concat(tape_.constant(z), tape_.constant(std::move(onehot)));
    return mlp(h, 0, params_.generator.size(), /*activate_last=*/false);
  }

  /// One phi(x) evaluation feeding all heads.
  Heads heads(ad::NodeId x) {
    const auto& vx = tape_.value(x);
    if (vx.rank() != 2 || vx.cols() != params_.dims.data_dim)
      throw ShapeMismatch("data batch " + ad::shape_string(vx.shape()));
    ++phi_evaluations_;
    const std::size_t phi_begin = params_.num_generator_tensors();
    Heads h{};
    h.features = mlp(x, phi_begin, params_.phi.size(), /*activate_last=*/true);
    const std::size_t psi_at = phi_begin + 2 * params_.phi.size();
    h.disc_logit = tape_.affine(h.features, leaves_[psi_at], leaves_[psi_at + 1]);
    h.class_plus = project(h.features, leaves_[psi_at + 2]);
    h.class_minus = project(h.features, leaves_[psi_at + 3]);
    h.extended = project(h.features, leaves_[psi_at + 4]);
    return h;
  }

  /// Heuristic projection logit psi(phi(x)) + (phi+(y) - phi-(y)) . phi(x).
  ad::NodeId pd_logit(const Heads& h, std::span<const std::size_t> labels) {
    check_labels(labels);
    const std::size_t psi_at = params_.num_generator_tensors() + 2 * params_.phi.size();
    std::vector<std::size_t> idx(labels.begin(), labels.end());
    ad::NodeId diff = tape_.sub(tape_.gather_rows(leaves_[psi_at + 2], idx),
                                tape_.gather_rows(leaves_[psi_at + 3], idx));
    ad::NodeId ones = tape_.constant(ad::Tensor(ad::Shape{params_.dims.feature_dim, 1}, 1.0));
    ad::NodeId cond = tape_.matmul(tape_.mul(diff, h.features), ones);
    return tape_.add(h.disc_logit, cond);
  }

  /// Normalizer the heuristic logit drops: log p(y|x)/q(y|x) under the
  /// softmax heads equals the projection term minus this value, which is
  /// logsumexp(phi+ . phi(x)) - logsumexp(phi- . phi(x)).
  ad::NodeId partition_term(const Heads& h) {
    return tape_.sub(tape_.logsumexp(h.class_plus), tape_.logsumexp(h.class_minus));
  }

  /// pd_logit with the partition term subtracted, i.e.
  /// psi(phi(x)) + log softmax+(y) - log softmax-(y).
  ad::NodeId pd_logit_full(const Heads& h, std::span<const std::size_t> labels) {
    return tape_.sub(pd_logit(h, labels), partition_term(h));
  }

 private:
  ad::Tape& tape_;
  ModelParams& params_;
  std::vector<ad::NodeId> leaves_;
  std::size_t phi_evaluations_ = 0;

  ad::NodeId mlp(ad::NodeId h, std::size_t first_leaf, std::size_t layers, bool activate_last) {
    for (std::size_t i = 0; i < layers; ++i) {
      h = tape_.affine(h, leaves_[first_leaf + 2 * i], leaves_[first_leaf + 2 * i + 1]);
      if (i + 1 < layers || activate_last) h = tape_.leaky_relu(h, kLeakySlope);
    }
    return h;
  }

  // features (B x d) times embedding^T (d x R) -> B x R
  ad::NodeId project(ad::NodeId features, ad::NodeId embedding) {
    const auto& e = tape_.value(embedding);
    ad::NodeId zero_bias = tape_.constant(ad::Tensor(ad::Shape{e.rows()}));
    return tape_.affine(features, embedding, zero_bias);
  }
};

/// Generator output values without keeping a tape around.
inline ad::Tensor generate_values(ModelParams& params, const ad::Tensor& z,
                                  std::span<const std::size_t> labels) {
  ad::Tape tape;
  BoundModel m(tape, params);
  return tape.value(m.generate(z, labels));
}

}  // namespace adclab::nn
