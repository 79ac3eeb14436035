#pragma once

// Per-method discriminator/classifier and generator losses, recorded on a
// tape so they can be differentiated. Every loss here is minimized.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adclab/autodiff.hpp"
#include "adclab/errors.hpp"
#include "adclab/nn.hpp"
#include "adclab/tabular.hpp"

namespace adclab::obj {

enum class GanLoss { non_saturating, hinge, least_squares };

inline std::string_view to_string(GanLoss g) {
  switch (g) {
    case GanLoss::non_saturating: return "non_saturating";
    case GanLoss::hinge: return "hinge";
    case GanLoss::least_squares: return "least_squares";
  }
  return "?";
}

inline GanLoss parse_gan_loss(std::string_view name) {
  for (auto g : {GanLoss::non_saturating, GanLoss::hinge, GanLoss::least_squares})
    if (to_string(g) == name) return g;
  throw InvalidSpec("unknown gan_loss '" + std::string(name) + "'");
}

struct MethodSpec {
  MethodId method = MethodId::adcgan;
  GanLoss gan_loss = GanLoss::non_saturating;
  double lambda = 1.0;
  // When set, the objective is (1 - lambda_prime) V + lambda_prime V_C and
  // lambda is not applied.
  std::optional<double> lambda_prime;
  bool include_gan_loss = true;

  bool classifier_based() const { return method != MethodId::pdgan; }

  void validate() const {
    if (!(lambda >= 0.0)) throw InvalidSpec("lambda must be >= 0");
    if (lambda_prime) {
      if (!(*lambda_prime >= 0.0 && *lambda_prime <= 1.0))
        throw InvalidSpec("lambda_prime must lie in [0, 1]");
      if (!classifier_based()) throw InvalidSpec("lambda_prime needs a classifier-based method");
    }
    if (method == MethodId::pdgan && !include_gan_loss)
      throw InvalidSpec("pdgan has no loss besides its projection GAN loss");
  }
};

// ---------------------------------------------------------------------------
// GAN losses on raw logits (batch x 1)

namespace detail {

// softplus(v) = log(1 + e^v), computed as a row-wise logsumexp over [0, v].
inline ad::NodeId softplus(ad::Tape& t, ad::NodeId v) {
  const auto& val = t.value(v);
  ad::NodeId zeros = t.constant(ad::Tensor(ad::Shape{val.rows(), 1}));
  return t.logsumexp(t.concat(zeros, v));
}

inline ad::NodeId filled_like(ad::Tape& t, ad::NodeId v, double fill) {
  return t.constant(ad::Tensor(t.value(v).shape(), fill));
}

}  // namespace detail

inline ad::NodeId gan_loss_d(ad::Tape& t, GanLoss variant, ad::NodeId real, ad::NodeId fake) {
  switch (variant) {
    case GanLoss::non_saturating:
      // -log sigmoid(d_r) - log(1 - sigmoid(d_f))
      return t.add(t.mean(detail::softplus(t, t.scale(real, -1.0))),
                   t.mean(detail::softplus(t, fake)));
    case GanLoss::hinge:
      return t.add(
          t.mean(t.leaky_relu(t.sub(detail::filled_like(t, real, 1.0), real), 0.0)),
          t.mean(t.leaky_relu(t.add(detail::filled_like(t, fake, 1.0), fake), 0.0)));
    case GanLoss::least_squares:
      return t.add(t.mean(t.square(t.sub(real, detail::filled_like(t, real, 1.0)))),
                   t.mean(t.square(fake)));
  }
  return real;
}

inline ad::NodeId gan_loss_g(ad::Tape& t, GanLoss variant, ad::NodeId fake) {
  switch (variant) {
    case GanLoss::non_saturating:
      return t.mean(detail::softplus(t, t.scale(fake, -1.0)));
    case GanLoss::hinge:
      return t.scale(t.mean(fake), -1.0);
    case GanLoss::least_squares:
      return t.mean(t.square(t.sub(fake, detail::filled_like(t, fake, 1.0))));
  }
  return fake;
}

/// Mean cross-entropy of row-wise softmax(logits) against target columns,
/// formed as logsumexp - selected logit.
inline ad::NodeId cross_entropy(ad::Tape& t, ad::NodeId logits,
                                std::vector<std::size_t> targets) {
  return t.mean(t.sub(t.logsumexp(logits), t.select_column(logits, std::move(targets))));
}

// ---------------------------------------------------------------------------
// Method losses

struct LabeledBatch {
  ad::Tensor x;                    // batch x data_dim
  std::vector<std::size_t> y;
};

struct LatentBatch {
  ad::Tensor z;                    // batch x latent_dim
  std::vector<std::size_t> y;      // labels drawn from the label prior
};

namespace detail {

inline std::vector<std::size_t> shifted(std::span<const std::size_t> y, std::size_t by) {
  std::vector<std::size_t> out(y.begin(), y.end());
  for (auto& v : out) v += by;
  return out;
}

inline std::vector<std::size_t> to_vec(std::span<const std::size_t> y) {
  return {y.begin(), y.end()};
}

// Combine the adversarial part V and the classifier part V_C per spec.
inline ad::NodeId combine(ad::Tape& t, const MethodSpec& spec, std::optional<ad::NodeId> v,
                          std::optional<ad::NodeId> c) {
  if (!c) return *v;  // projection method
  if (spec.lambda_prime) {
    const double lp = *spec.lambda_prime;
    return t.add(t.scale(*v, 1.0 - lp), t.scale(*c, lp));
  }
  ad::NodeId weighted = t.scale(*c, spec.lambda);
  if (v) return t.add(*v, weighted);
  return weighted;
}

inline bool needs_v(const MethodSpec& spec) {
  return spec.include_gan_loss || spec.lambda_prime.has_value() || !spec.classifier_based();
}

}  // namespace detail

/// Loss of the discriminator and every auxiliary head. `fake_x` is normally a
/// detached constant so only discriminator-side tensors receive gradient.
inline ad::NodeId discriminator_loss(const MethodSpec& spec, nn::BoundModel& model,
                                     const LabeledBatch& real, ad::NodeId fake_x,
                                     std::span<const std::size_t> fake_y) {
  spec.validate();
  ad::Tape& t = model.tape();
  model.check_labels(real.y);
  model.check_labels(fake_y);
  const std::size_t k = model.params().dims.num_classes;
  const nn::Heads hr = model.heads(t.constant(real.x));
  const nn::Heads hf = model.heads(fake_x);

  std::optional<ad::NodeId> v;
  if (detail::needs_v(spec)) {
    if (spec.method == MethodId::pdgan)
      v = gan_loss_d(t, spec.gan_loss, model.pd_logit(hr, real.y), model.pd_logit(hf, fake_y));
    else
      v = gan_loss_d(t, spec.gan_loss, hr.disc_logit, hf.disc_logit);
  }

  std::optional<ad::NodeId> c;
  switch (spec.method) {
    case MethodId::acgan:
      c = cross_entropy(t, hr.class_plus, detail::to_vec(real.y));
      break;
    case MethodId::acgan_original:
      c = t.add(cross_entropy(t, hr.class_plus, detail::to_vec(real.y)),
                cross_entropy(t, hf.class_plus, detail::to_vec(fake_y)));
      break;
    case MethodId::tacgan:
      c = t.add(cross_entropy(t, hr.class_plus, detail::to_vec(real.y)),
                cross_entropy(t, hf.class_minus, detail::to_vec(fake_y)));
      break;
    case MethodId::adcgan:
      c = t.add(cross_entropy(t, t.concat(hr.class_plus, hr.class_minus), detail::to_vec(real.y)),
                cross_entropy(t, t.concat(hf.class_plus, hf.class_minus),
                              detail::shifted(fake_y, k)));
      break;
    case MethodId::amgan:
      c = t.add(cross_entropy(t, hr.extended, detail::shifted(real.y, 1)),
                cross_entropy(t, hf.extended, std::vector<std::size_t>(fake_y.size(), 0)));
      break;
    case MethodId::pdgan:
      break;
  }
  return detail::combine(t, spec, v, c);
}

/// Generator loss for generated samples `fake_x` carrying labels `fake_y`.
inline ad::NodeId generator_loss(const MethodSpec& spec, nn::BoundModel& model, ad::NodeId fake_x,
                                 std::span<const std::size_t> fake_y) {
  spec.validate();
  ad::Tape& t = model.tape();
  model.check_labels(fake_y);
  const nn::Heads hf = model.heads(fake_x);

  std::optional<ad::NodeId> v;
  if (detail::needs_v(spec)) {
    v = spec.method == MethodId::pdgan
            ? gan_loss_g(t, spec.gan_loss, model.pd_logit(hf, fake_y))
            : gan_loss_g(t, spec.gan_loss, hf.disc_logit);
  }

  std::optional<ad::NodeId> c;
  switch (spec.method) {
    case MethodId::acgan:
    case MethodId::acgan_original:
      // -E_Q log C(y|x)
      c = cross_entropy(t, hf.class_plus, detail::to_vec(fake_y));
      break;
    case MethodId::tacgan:
      // -E_Q [log C(y|x) - log C_mi(y|x)]
      c = t.sub(cross_entropy(t, hf.class_plus, detail::to_vec(fake_y)),
                cross_entropy(t, hf.class_minus, detail::to_vec(fake_y)));
      break;
    case MethodId::adcgan: {
      // -E_Q [log C_d(y+|x) - log C_d(y-|x)]; the shared 2K-way normalizer
      // cancels, leaving the logit difference.
      ad::NodeId diff = t.sub(t.select_column(hf.class_plus, detail::to_vec(fake_y)),
                              t.select_column(hf.class_minus, detail::to_vec(fake_y)));
      c = t.scale(t.mean(diff), -1.0);
      break;
    }
    case MethodId::amgan:
      // maximize E_Q log D+(y|x)
      c = cross_entropy(t, hf.extended, detail::shifted(fake_y, 1));
      break;
    case MethodId::pdgan:
      break;
  }
  return detail::combine(t, spec, v, c);
}

struct LossNodes {
  ad::NodeId loss_d;
  ad::NodeId loss_g;
  ad::NodeId fake_x;
};

/// Both losses on one tape: the discriminator sees a detached copy of the
/// generated batch, the generator loss is attached to G.
inline LossNodes build_method_losses(const MethodSpec& spec, nn::BoundModel& model,
                                     const LabeledBatch& real, const LatentBatch& latent) {
  ad::Tape& t = model.tape();
  ad::NodeId fake = model.generate(latent.z, latent.y);
  ad::NodeId detached = t.constant(t.value(fake));
  LossNodes out{};
  out.loss_d = discriminator_loss(spec, model, real, detached, latent.y);
  out.loss_g = generator_loss(spec, model, fake, latent.y);
  out.fake_x = fake;
  return out;
}

struct MethodLosses {
  double loss_d;
  double loss_g;
};

inline MethodLosses method_losses(const MethodSpec& spec, nn::ModelParams& params,
                                  const LabeledBatch& real, const LatentBatch& latent) {
  ad::Tape tape;
  nn::BoundModel model(tape, params);
  const auto nodes = build_method_losses(spec, model, real, latent);
  return {tape.value(nodes.loss_d).item(), tape.value(nodes.loss_g).item()};
}

}  // namespace adclab::obj
