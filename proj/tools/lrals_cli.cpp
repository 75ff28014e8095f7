#include "lrals/errors.hpp"
#include "lrals/harness.hpp"
#include "lrals/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string out_dir = "results";
  std::optional<std::size_t> max_sweeps;
  std::optional<double> grad_tol;

  lrals::ExperimentConfig apply(lrals::ExperimentConfig cfg) const {
    if (seed) cfg.seed = *seed;
    if (max_sweeps) cfg.stop.max_sweeps = *max_sweeps;
    if (grad_tol) cfg.stop.grad_tol = *grad_tol;
    cfg.validate();
    return cfg;
  }
};

std::string show(const std::optional<double>& x) {
  if (!x) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *x);
  return buf;
}

void summarize(const lrals::ExperimentResult& r) {
  std::cout << r.config.name << ":";
  if (r.trace) {
    std::cout << " sweeps=" << r.trace->records.back().sweep << " ("
              << lrals::stop_reason_name(r.trace->reason) << ")";
  }
  std::cout << " rho_assembled=" << show(r.report.rho_assembled)
            << " rho_theoretical=" << show(r.report.rho_theoretical)
            << " slope=" << show(r.report.slope_observed) << "\n";
  for (const auto& note : r.report.notes) std::cout << "  note: " << note << "\n";
  for (const auto& f : r.files) std::cout << "  wrote " << f.string() << "\n";
}

int run_verify(std::uint64_t seed) {
  const auto results = lrals::run_invariant_suite(seed);
  std::size_t passed = 0;
  for (const auto& c : results) {
    if (c.passed) ++passed;
    std::printf("%s  %s  value=%.3e bound=%.3e%s%s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.value, c.tolerance, c.detail.empty() ? "" : "  ", c.detail.c_str());
  }
  std::printf("verify: %zu passed, %zu failed\n", passed, results.size() - passed);
  return passed == results.size() ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Alternating least squares on the rank-k matrix variety: runs and rate analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  app.add_option("--seed", ov.seed, "Override the experiment seed (verify: suite seed)");
  app.add_option("--out-dir", ov.out_dir, "Output directory")->capture_default_str();
  app.add_option("--max-sweeps", ov.max_sweeps, "Override solver.max_sweeps");
  app.add_option("--grad-tol", ov.grad_tol, "Override solver.grad_tol");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run ALS and the rate analysis for one config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of the config's sweep section");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* rate = app.add_subcommand("rate", "Rate analysis only, no solver run");
  rate->add_option("config", config_path, "Experiment config (JSON)")->required();
  auto* verify = app.add_subcommand("verify", "Run the invariant suite on seeded instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) return run_verify(ov.seed.value_or(1));

    const lrals::ExperimentConfig cfg = ov.apply(lrals::load_config(config_path));
    lrals::RunOptions options;
    options.out_dir = ov.out_dir;
    if (run->parsed()) {
      summarize(lrals::run_experiment(cfg, options));
    } else if (rate->parsed()) {
      options.solve = false;
      summarize(lrals::run_experiment(cfg, options));
    } else if (sweep->parsed()) {
      for (const auto& r : lrals::run_sweep(cfg, options)) summarize(r);
      std::cout << "wrote " << (options.out_dir / (cfg.name + "_sweep.json")).string() << "\n";
    }
    return 0;
  } catch (const lrals::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
