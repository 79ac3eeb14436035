#pragma once

// Training loop, evaluation, run directories and lambda-prime sweeps.
//
// Run directory layout (all optional, only written when out_dir is set):
//   config.txt       resolved configuration, every key spelled out
//   metrics.csv      one row per evaluation, appended as training proceeds
//   checkpoint.ckpt  final parameters
//   samples.csv      x,y of the final evaluation's generated samples
//   summary.txt      terminal metrics and divergence status

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "adclab/adam.hpp"
#include "adclab/autodiff.hpp"
#include "adclab/checkpoint.hpp"
#include "adclab/config.hpp"
#include "adclab/errors.hpp"
#include "adclab/eval.hpp"
#include "adclab/format.hpp"
#include "adclab/nn.hpp"
#include "adclab/objectives.hpp"
#include "adclab/rng.hpp"
#include "adclab/svg.hpp"
#include "adclab/synthdata.hpp"

namespace adclab {

inline constexpr std::size_t kEvalRealSamples = 30000;
inline constexpr std::size_t kEvalFakeSamples = 15000;

/// Independent seeds for the streams of one run, derived from the run seed.
struct RunSeeds {
  std::uint64_t init, train, eval_real, eval_fake, eval_batch;

  static RunSeeds from(std::uint64_t seed) {
    SplitMix64 mix(seed);
    return {mix(), mix(), mix(), mix(), mix()};
  }
};

struct MetricsRow {
  std::size_t step = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  eval::RecoveryMetrics metrics;
};

struct RunRecord {
  std::vector<MetricsRow> rows;
  bool diverged = false;
  std::size_t diverged_at = 0;
  std::string reason;
  nn::ModelParams params;
  synth::LabeledSamples final_samples;

  const MetricsRow& last() const {
    if (rows.empty()) throw MissingData("run has no evaluation rows");
    return rows.back();
  }
};

inline std::string metrics_header(std::size_t num_classes) {
  std::string h = "step,loss_d,loss_g,l1_density";
  for (std::size_t k = 0; k < num_classes; ++k) h += ",frechet_c" + std::to_string(k);
  for (std::size_t k = 0; k < num_classes; ++k) h += ",collapse_c" + std::to_string(k);
  return h + ",label_consistency";
}

inline std::string metrics_line(const MetricsRow& r) {
  std::string s = std::to_string(r.step) + "," + format_double(r.loss_d) + "," +
                  format_double(r.loss_g) + "," + format_double(r.metrics.l1_density);
  for (double v : r.metrics.frechet) s += "," + format_double(v);
  for (double v : r.metrics.collapse) s += "," + format_double(v);
  return s + "," + format_double(r.metrics.label_consistency);
}

inline std::string metrics_csv(const RunRecord& rec, std::size_t num_classes) {
  std::string s = metrics_header(num_classes) + "\n";
  for (const auto& r : rec.rows) s += metrics_line(r) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Batches

inline obj::LabeledBatch sample_real_batch(const synth::GaussianMixtureSpec& spec,
                                           std::size_t n, Rng& rng) {
  synth::LabeledSamples s;
  synth::sample_into(spec, n, rng, s);
  return {ad::Tensor(ad::Shape{n, spec.data_dim}, std::move(s.x)), std::move(s.y)};
}

/// Standard normal latents with labels uniform over the K classes.
inline obj::LatentBatch sample_latent_batch(const synth::GaussianMixtureSpec& spec,
                                            std::size_t n, std::size_t latent_dim, Rng& rng) {
  obj::LatentBatch b{ad::Tensor(ad::Shape{n, latent_dim}), std::vector<std::size_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    b.y[i] = rng.index(spec.num_classes());
    for (std::size_t j = 0; j < latent_dim; ++j) b.z.at(i, j) = rng.normal();
  }
  return b;
}

inline synth::LabeledSamples generate_samples(nn::ModelParams& params,
                                              const synth::GaussianMixtureSpec& spec,
                                              std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto latent = sample_latent_batch(spec, n, params.dims.latent_dim, rng);
  const auto x = nn::generate_values(params, latent.z, latent.y);
  synth::LabeledSamples out;
  out.data_dim = params.dims.data_dim;
  out.x.assign(x.data().begin(), x.data().end());
  out.y = latent.y;
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Fixed held-out data for one run: the same real sample, latent batch and
/// loss batch are used at every evaluation step.
class Evaluator {
 public:
  Evaluator(const TrainConfig& cfg, const RunSeeds& seeds)
      : cfg_(cfg),
        fake_seed_(seeds.eval_fake),
        real_(synth::sample(cfg.data_spec, kEvalRealSamples, seeds.eval_real)) {
    Rng rng(seeds.eval_batch);
    real_batch_ = sample_real_batch(cfg.data_spec, cfg.batch_size, rng);
    latent_batch_ = sample_latent_batch(cfg.data_spec, cfg.batch_size, cfg.latent_dim, rng);
  }

  MetricsRow evaluate(nn::ModelParams& params, std::size_t step,
                      synth::LabeledSamples* samples_out = nullptr) const {
    MetricsRow row;
    row.step = step;
    const auto losses = obj::method_losses(cfg_.method_spec, params, real_batch_, latent_batch_);
    row.loss_d = losses.loss_d;
    row.loss_g = losses.loss_g;
    auto fake = generate_samples(params, cfg_.data_spec, kEvalFakeSamples, fake_seed_);
    for (double v : fake.x)
      if (!std::isfinite(v)) throw NonFinite("generated sample is not finite");
    row.metrics = eval::recovery_metrics(cfg_.data_spec, real_, fake);
    if (samples_out) *samples_out = std::move(fake);
    return row;
  }

 private:
  const TrainConfig& cfg_;
  std::uint64_t fake_seed_;
  synth::LabeledSamples real_;
  obj::LabeledBatch real_batch_;
  obj::LatentBatch latent_batch_;
};

inline bool row_finite(const MetricsRow& r) {
  if (!std::isfinite(r.loss_d) || !std::isfinite(r.loss_g) ||
      !std::isfinite(r.metrics.l1_density) || !std::isfinite(r.metrics.label_consistency))
    return false;
  for (double v : r.metrics.frechet)
    if (!std::isfinite(v)) return false;
  for (double v : r.metrics.collapse)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Run directory helpers

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingData("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::string samples_csv(const synth::LabeledSamples& s) {
  std::string out = "x,y\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += format_double(s.x[i * s.data_dim]) + "," + std::to_string(s.y[i]) + "\n";
  return out;
}

inline synth::LabeledSamples parse_samples_csv(std::string_view text) {
  synth::LabeledSamples s;
  bool header = true;
  for (auto line : split(text, '\n')) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto parts = split(line, ',');
    if (parts.size() != 2) throw MissingData("malformed samples line '" + std::string(line) + "'");
    s.x.push_back(parse_double(parts[0]));
    s.y.push_back(parse_unsigned(parts[1]));
  }
  return s;
}

inline std::string summary_text(const TrainConfig& cfg, const RunRecord& rec) {
  std::ostringstream os;
  os << "method = " << to_string(cfg.method_spec.method) << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "diverged = " << (rec.diverged ? "true" : "false") << '\n';
  if (rec.diverged) {
    os << "diverged_at = " << rec.diverged_at << '\n';
    os << "reason = " << rec.reason << '\n';
  }
  if (!rec.rows.empty()) {
    const auto& r = rec.rows.back();
    os << "final_step = " << r.step << '\n';
    os << "l1_density = " << format_double(r.metrics.l1_density) << '\n';
    os << "max_frechet = " << format_double(r.metrics.max_frechet()) << '\n';
    os << "min_collapse = " << format_double(r.metrics.min_collapse()) << '\n';
    os << "label_consistency = " << format_double(r.metrics.label_consistency) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Training

/// Gradients of the tape leaves in [begin, end) of the parameter order.
inline std::vector<const ad::Tensor*> leaf_grads(const ad::Gradients& g,
                                                 std::span<const ad::NodeId> leaves,
                                                 std::size_t begin, std::size_t end) {
  std::vector<const ad::Tensor*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&g[leaves[i]]);
  return out;
}

inline void require_finite_loss(double v, const char* which) {
  if (!std::isfinite(v)) throw NonFinite(std::string(which) + " loss is not finite");
}

/// Trains from `init` (or from fresh parameters seeded by cfg.seed). Each
/// generator step is preceded by d_steps_per_g discriminator steps; every
/// discriminator step draws a real batch and then a latent batch. Evaluation
/// rows are taken at step 0, every eval_every steps, and at the last step.
inline RunRecord train(const TrainConfig& cfg, const nn::ModelParams* init = nullptr,
                       const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  cfg.validate();
  const RunSeeds seeds = RunSeeds::from(cfg.seed);
  RunRecord rec;
  rec.params = init ? *init : nn::init_params(cfg.net_dims(), seeds.init);
  {
    const auto d = cfg.net_dims();
    const auto& p = rec.params.dims;
    if (p.latent_dim != d.latent_dim || p.data_dim != d.data_dim ||
        p.feature_dim != d.feature_dim || p.num_classes != d.num_classes || p.hidden != d.hidden)
      throw ConfigError("initial parameters do not match the configured network");
  }
  auto& params = rec.params;
  const std::size_t k = cfg.data_spec.num_classes();

  std::ofstream metrics_file;
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text(*out_dir / "config.txt", to_config_text(cfg));
    metrics_file.open(*out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics_file) throw Error("cannot write metrics.csv in " + out_dir->string());
    metrics_file << metrics_header(k) << '\n' << std::flush;
  }

  const Evaluator evaluator(cfg, seeds);
  const auto record_row = [&](std::size_t step, bool last) {
    MetricsRow row = evaluator.evaluate(params, step, last ? &rec.final_samples : nullptr);
    if (!row_finite(row)) throw NonFinite("evaluation metrics at step " + std::to_string(step));
    rec.rows.push_back(row);
    if (metrics_file.is_open()) metrics_file << metrics_line(row) << '\n' << std::flush;
  };

  auto all = params.tensors();
  const std::size_t n_gen = params.num_generator_tensors();
  std::vector<ad::Tensor*> gen_params, disc_params;
  for (std::size_t i = 0; i < all.size(); ++i)
    (i < n_gen ? gen_params : disc_params).push_back(all[i].tensor);
  OptimizerState gen_state = OptimizerState::for_params(gen_params);
  OptimizerState disc_state = OptimizerState::for_params(disc_params);

  Rng rng(seeds.train);
  std::size_t step = 0;
  try {
    record_row(0, cfg.total_steps == 0);
    for (step = 1; step <= cfg.total_steps; ++step) {
      for (std::size_t s = 0; s < cfg.d_steps_per_g; ++s) {
        const auto real = sample_real_batch(cfg.data_spec, cfg.batch_size, rng);
        const auto latent = sample_latent_batch(cfg.data_spec, cfg.batch_size, cfg.latent_dim, rng);
        ad::Tape tape;
        nn::BoundModel model(tape, params);
        const ad::NodeId fake = model.generate(latent.z, latent.y);
        const ad::NodeId detached = tape.constant(tape.value(fake));
        const ad::NodeId loss =
            obj::discriminator_loss(cfg.method_spec, model, real, detached, latent.y);
        require_finite_loss(tape.value(loss).item(), "discriminator");
        const auto grads = tape.backward(loss);
        const auto g = leaf_grads(grads, model.leaves(), n_gen, all.size());
        adam_step(disc_state, disc_params, g, cfg.adam);
      }
      {
        const auto latent = sample_latent_batch(cfg.data_spec, cfg.batch_size, cfg.latent_dim, rng);
        ad::Tape tape;
        nn::BoundModel model(tape, params);
        const ad::NodeId fake = model.generate(latent.z, latent.y);
        const ad::NodeId loss = obj::generator_loss(cfg.method_spec, model, fake, latent.y);
        require_finite_loss(tape.value(loss).item(), "generator");
        const auto grads = tape.backward(loss);
        const auto g = leaf_grads(grads, model.leaves(), 0, n_gen);
        adam_step(gen_state, gen_params, g, cfg.adam);
      }
      const bool last = step == cfg.total_steps;
      if (last || step % cfg.eval_every == 0) record_row(step, last);
    }
  } catch (const NonFinite& e) {
    rec.diverged = true;
    rec.diverged_at = std::min(step, cfg.total_steps);
    rec.reason = e.what();
  } catch (const NonFiniteGradient& e) {
    rec.diverged = true;
    rec.diverged_at = step;
    rec.reason = e.what();
  }

  if (out_dir) {
    save_checkpoint(*out_dir / "checkpoint.ckpt", params, {cfg.method_spec.method, cfg.seed});
    write_text(*out_dir / "samples.csv", samples_csv(rec.final_samples));
    write_text(*out_dir / "summary.txt", summary_text(cfg, rec));
  }
  return rec;
}

/// One evaluation row for stored parameters, on the run's fixed held-out data.
inline MetricsRow evaluate_checkpoint(const TrainConfig& cfg, const std::filesystem::path& ckpt,
                                      CheckpointInfo* info = nullptr) {
  cfg.validate();
  nn::ModelParams params = nn::init_params(cfg.net_dims(), 0);
  const auto stored = load_checkpoint(ckpt, params);
  if (info) *info = stored;
  const Evaluator evaluator(cfg, RunSeeds::from(cfg.seed));
  return evaluator.evaluate(params, cfg.total_steps);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  MethodId method;
  double lambda_prime;
  std::uint64_t seed;
  bool diverged = false;
  std::string error;
  std::optional<MetricsRow> final_row;
};

inline std::uint64_t sweep_cell_seed(std::uint64_t base, MethodId method, double lambda_prime) {
  return base + stable_hash(std::string(to_string(method)) + ":" + format_double(lambda_prime));
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string s =
      "method,lambda_prime,seed,status,l1_density,max_frechet,min_collapse,label_consistency\n";
  for (const auto& c : cells) {
    s += std::string(to_string(c.method)) + "," + format_double(c.lambda_prime) + "," +
         std::to_string(c.seed) + ",";
    s += !c.error.empty() ? "error" : c.diverged ? "diverged" : "ok";
    if (c.final_row) {
      const auto& m = c.final_row->metrics;
      s += "," + format_double(m.l1_density) + "," + format_double(m.max_frechet()) + "," +
           format_double(m.min_collapse()) + "," + format_double(m.label_consistency);
    } else {
      s += ",nan,nan,nan,nan";
    }
    s += "\n";
  }
  return s;
}

/// One training run per (method, lambda_prime) cell. Cells run on `workers`
/// threads; a failing cell is recorded and the rest continue. When out_dir is
/// given each cell gets a subdirectory and sweep.csv summarizes them.
inline std::vector<SweepCell> sweep_lambda_prime(
    const TrainConfig& base, const std::vector<MethodId>& methods,
    const std::vector<double>& lambda_primes, std::size_t workers = 1,
    const std::optional<std::filesystem::path>& out_dir = std::nullopt) {
  for (double lp : lambda_primes)
    if (!(lp >= 0.0 && lp <= 1.0)) throw InvalidSpec("lambda_prime values must lie in [0, 1]");
  std::vector<SweepCell> cells;
  for (auto m : methods)
    for (double lp : lambda_primes) cells.push_back({m, lp, sweep_cell_seed(base.seed, m, lp), false, {}, std::nullopt});

  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      auto& cell = cells[i];
      TrainConfig cfg = base;
      cfg.method_spec.method = cell.method;
      cfg.method_spec.lambda_prime = cell.lambda_prime;
      cfg.seed = cell.seed;
      try {
        std::optional<std::filesystem::path> dir;
        if (out_dir)
          dir = *out_dir / (std::string(to_string(cell.method)) + "_lp" +
                            format_double(cell.lambda_prime));
        const auto rec = train(cfg, nullptr, dir);
        cell.diverged = rec.diverged;
        if (!rec.rows.empty()) cell.final_row = rec.rows.back();
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(cells.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text(*out_dir / "sweep.csv", sweep_csv(cells));
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Plotting

/// Truth p(x, y) per class (dashed) and the prior-weighted KDE of generated
/// samples per class (solid), one colour per class.
inline std::string density_panel(const synth::GaussianMixtureSpec& spec,
                                 const synth::LabeledSamples& fake, const std::string& title) {
  spec.validate();
  const std::size_t k = spec.num_classes();
  const auto fake_c = fake.size() ? eval::split_by_class(fake, k) : eval::ByClass(k);
  const auto grid = eval::evaluation_grid(spec, fake_c);
  std::vector<svg::Curve> curves;
  for (std::size_t y = 0; y < k; ++y) {
    svg::Curve c{"truth c" + std::to_string(y), grid, {}, svg::class_color(y), true};
    for (double x : grid) c.y.push_back(synth::true_density(spec, x, y));
    curves.push_back(std::move(c));
  }
  for (std::size_t y = 0; y < k; ++y) {
    const auto& v = fake_c[y];
    if (v.size() < 2) continue;
    auto est = eval::kde(v, eval::silverman_bandwidth(v).value, grid);
    const double w = static_cast<double>(v.size()) / static_cast<double>(fake.size());
    for (double& e : est.values) e *= w;
    curves.push_back({"generated c" + std::to_string(y), grid, est.values, svg::class_color(y),
                      false});
  }
  return svg::render(curves, title);
}

/// Writes density.svg into a run directory from its config.txt and samples.csv.
inline std::filesystem::path plot_run(const std::filesystem::path& run_dir) {
  const auto cfg = load_config(run_dir / "config.txt");
  synth::LabeledSamples fake;
  if (std::filesystem::exists(run_dir / "samples.csv"))
    fake = parse_samples_csv(read_text(run_dir / "samples.csv"));
  const auto out = run_dir / "density.svg";
  write_text(out, density_panel(cfg.data_spec, fake,
                                std::string(to_string(cfg.method_spec.method)) + " seed " +
                                    std::to_string(cfg.seed)));
  return out;
}

}  // namespace adclab
