// Command-line front end for the objective laboratory.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "adclab/config.hpp"
#include "adclab/runner.hpp"
#include "adclab/theory_suite.hpp"

namespace fs = std::filesystem;

namespace {

int run_verify(std::size_t trials, std::uint64_t seed, const std::string& out) {
  adclab::TheorySuiteOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  const auto report = adclab::verify_theory_suite(opt);
  const auto csv = report.csv();
  if (out.empty()) {
    std::cout << csv;
  } else {
    adclab::write_text(out, csv);
    for (const auto& c : report.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " worst=" << adclab::format_double(c.worst)
                << '\n';
  }
  return report.all_passed() ? 0 : 1;
}

int run_train(const std::string& config, const std::string& out_dir) {
  const auto cfg = adclab::load_config(config);
  const fs::path dir = out_dir.empty() ? fs::path("runs") / fs::path(config).stem() : fs::path(out_dir);
  const auto rec = adclab::train(cfg, nullptr, dir);
  std::cout << adclab::summary_text(cfg, rec);
  std::cout << "run directory: " << dir.string() << '\n';
  return rec.diverged ? 2 : 0;
}

int run_eval(const std::string& checkpoint, const std::string& config) {
  const auto cfg = adclab::load_config(config);
  adclab::CheckpointInfo info{};
  const auto row = adclab::evaluate_checkpoint(cfg, checkpoint, &info);
  std::cout << "# method " << adclab::to_string(info.method) << " seed " << info.seed << '\n';
  std::cout << adclab::metrics_header(cfg.data_spec.num_classes()) << '\n'
            << adclab::metrics_line(row) << '\n';
  return 0;
}

int run_sweep(const std::string& config, const std::string& lambda_primes,
              const std::string& methods, const std::string& out_dir, std::size_t workers) {
  const auto cfg = adclab::load_config(config);
  std::vector<adclab::MethodId> ms;
  if (methods.empty()) {
    ms.push_back(cfg.method_spec.method);
  } else {
    for (auto m : adclab::split(methods, ',')) ms.push_back(adclab::parse_method(m));
  }
  const fs::path dir =
      out_dir.empty() ? fs::path("runs") / (fs::path(config).stem().string() + "_sweep") : fs::path(out_dir);
  const auto cells = adclab::sweep_lambda_prime(cfg, ms, adclab::parse_double_list(lambda_primes),
                                                workers, dir);
  std::cout << adclab::sweep_csv(cells);
  for (const auto& c : cells)
    if (!c.error.empty())
      std::cerr << adclab::to_string(c.method) << " lambda_prime " << c.lambda_prime << ": "
                << c.error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional GAN objective laboratory"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify-theory", "Check the tabular identities on random tables");
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::string report_out;
  verify->add_option("--trials", trials, "Random table pairs")->check(CLI::PositiveNumber);
  verify->add_option("--seed", seed, "Seed for table generation");
  verify->add_option("--out", report_out, "Write the report CSV here instead of stdout");

  auto* train = app.add_subcommand("train", "Train one toy conditional GAN");
  std::string config, out_dir;
  train->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out-dir", out_dir, "Run directory (default runs/<config stem>)");

  auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--config", config, "Config the checkpoint was trained with")
      ->required()
      ->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Train one run per (method, lambda_prime) cell");
  std::string lambda_primes, methods;
  std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  sweep->add_option("--config", config, "Base config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--lambda-prime", lambda_primes, "Comma-separated values in [0,1]")->required();
  sweep->add_option("--methods", methods, "Comma-separated methods (default: the config's)");
  sweep->add_option("--out-dir", out_dir, "Sweep directory");
  sweep->add_option("--workers", workers, "Concurrent cells")->check(CLI::PositiveNumber);

  auto* plot = app.add_subcommand("plot", "Render density.svg for a run directory");
  std::string run_dir;
  plot->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return run_verify(trials, seed, report_out);
    if (*train) return run_train(config, out_dir);
    if (*evaluate) return run_eval(checkpoint, config);
    if (*sweep) return run_sweep(config, lambda_primes, methods, out_dir, workers);
    if (*plot) {
      std::cout << adclab::plot_run(run_dir).string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
