#pragma once

// Training configuration and its flat `key = value` text form. Blank lines and
// lines starting with '#' are ignored; unknown keys are rejected. List values
// are comma separated.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "adclab/adam.hpp"
#include "adclab/errors.hpp"
#include "adclab/format.hpp"
#include "adclab/nn.hpp"
#include "adclab/objectives.hpp"
#include "adclab/synthdata.hpp"

namespace adclab {

struct TrainConfig {
  obj::MethodSpec method_spec;
  synth::GaussianMixtureSpec data_spec = synth::GaussianMixtureSpec::default_1d();
  std::size_t latent_dim = 4;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 32;
  AdamHyper adam;
  std::size_t batch_size = 128;
  std::size_t total_steps = 20000;
  std::size_t d_steps_per_g = 2;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1000;

  nn::NetDims net_dims() const {
    nn::NetDims d;
    d.latent_dim = latent_dim;
    d.data_dim = data_spec.data_dim;
    d.feature_dim = feature_dim;
    d.num_classes = data_spec.num_classes();
    d.hidden = hidden;
    return d;
  }

  void validate() const {
    method_spec.validate();
    data_spec.validate();
    if (!(adam.lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) throw ConfigError("beta1 must be in [0,1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) throw ConfigError("beta2 must be in [0,1)");
    if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (d_steps_per_g == 0) throw ConfigError("d_steps_per_g must be positive");
    if (eval_every == 0) throw ConfigError("eval_every must be positive");
    if (latent_dim == 0 || feature_dim == 0) throw ConfigError("network sizes must be positive");
  }
};

namespace detail {

inline bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("not a boolean: '" + std::string(v) + "'");
}

}  // namespace detail

inline TrainConfig parse_config(std::string_view text) {
  TrainConfig cfg;
  std::vector<double> means, stds, priors;
  bool mixture_given = false;
  std::set<std::string, std::less<>> seen;

  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    try {
      if (key == "method") cfg.method_spec.method = parse_method(value);
      else if (key == "gan_loss") cfg.method_spec.gan_loss = obj::parse_gan_loss(value);
      else if (key == "lambda") cfg.method_spec.lambda = parse_double(value);
      else if (key == "lambda_prime") {
        if (value.empty() || value == "none") cfg.method_spec.lambda_prime.reset();
        else cfg.method_spec.lambda_prime = parse_double(value);
      } else if (key == "include_gan_loss") cfg.method_spec.include_gan_loss = detail::parse_bool(value);
      else if (key == "seed") cfg.seed = parse_unsigned(value);
      else if (key == "lr") cfg.adam.lr = parse_double(value);
      else if (key == "beta1") cfg.adam.beta1 = parse_double(value);
      else if (key == "beta2") cfg.adam.beta2 = parse_double(value);
      else if (key == "epsilon") cfg.adam.epsilon = parse_double(value);
      else if (key == "batch_size") cfg.batch_size = parse_unsigned(value);
      else if (key == "total_steps") cfg.total_steps = parse_unsigned(value);
      else if (key == "d_steps_per_g") cfg.d_steps_per_g = parse_unsigned(value);
      else if (key == "eval_every") cfg.eval_every = parse_unsigned(value);
      else if (key == "latent_dim") cfg.latent_dim = parse_unsigned(value);
      else if (key == "feature_dim") cfg.feature_dim = parse_unsigned(value);
      else if (key == "hidden") {
        cfg.hidden.clear();
        for (auto part : split(value, ',')) cfg.hidden.push_back(parse_unsigned(part));
      } else if (key == "mixture.means") {
        means = parse_double_list(value);
        mixture_given = true;
      } else if (key == "mixture.stds") {
        stds = parse_double_list(value);
        mixture_given = true;
      } else if (key == "mixture.priors") {
        priors = parse_double_list(value);
        mixture_given = true;
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InvalidSpec& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  if (mixture_given) {
    if (means.empty() || means.size() != stds.size() || means.size() != priors.size())
      throw ConfigError("mixture.means, mixture.stds and mixture.priors must all be given with "
                        "one entry per class");
    cfg.data_spec = synth::GaussianMixtureSpec{};
    for (std::size_t k = 0; k < means.size(); ++k)
      cfg.data_spec.components.push_back({{means[k]}, {stds[k]}, priors[k]});
  }
  try {
    cfg.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key written out, so the text reproduces `cfg` exactly.
inline std::string to_config_text(const TrainConfig& cfg) {
  std::ostringstream os;
  const auto& m = cfg.method_spec;
  os << "method = " << to_string(m.method) << '\n';
  os << "gan_loss = " << obj::to_string(m.gan_loss) << '\n';
  os << "lambda = " << format_double(m.lambda) << '\n';
  os << "lambda_prime = " << (m.lambda_prime ? format_double(*m.lambda_prime) : "none") << '\n';
  os << "include_gan_loss = " << (m.include_gan_loss ? "true" : "false") << '\n';
  os << "seed = " << cfg.seed << '\n';
  os << "lr = " << format_double(cfg.adam.lr) << '\n';
  os << "beta1 = " << format_double(cfg.adam.beta1) << '\n';
  os << "beta2 = " << format_double(cfg.adam.beta2) << '\n';
  os << "epsilon = " << format_double(cfg.adam.epsilon) << '\n';
  os << "batch_size = " << cfg.batch_size << '\n';
  os << "total_steps = " << cfg.total_steps << '\n';
  os << "d_steps_per_g = " << cfg.d_steps_per_g << '\n';
  os << "eval_every = " << cfg.eval_every << '\n';
  os << "latent_dim = " << cfg.latent_dim << '\n';
  os << "hidden = ";
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i) os << (i ? "," : "") << cfg.hidden[i];
  os << '\n';
  os << "feature_dim = " << cfg.feature_dim << '\n';
  std::vector<double> means, stds, priors;
  for (const auto& c : cfg.data_spec.components) {
    means.push_back(c.mean[0]);
    stds.push_back(c.stddev[0]);
    priors.push_back(c.prior);
  }
  os << "mixture.means = " << join_doubles(means) << '\n';
  os << "mixture.stds = " << join_doubles(stds) << '\n';
  os << "mixture.priors = " << join_doubles(priors) << '\n';
  return os.str();
}

}  // namespace adclab
