#pragma once

// Experiment runner: problems with prescribed spectra, solver + analyzer runs,
// CSV/JSON output.
//
// Config schema (JSON):
//   {
//     "name": "fig1a_s3_1e-4",                 file stem for outputs
//     "operator": {"kind": "identity" | "kronecker" | "laplace2d" | "dense_spd",
//                  "seed": 7},                 seed optional, defaults to "seed"
//     "m": 50, "n": 50, "k": 2,
//     "spectrum": {"target": "solution" | "reduced", "values": [1, 1e-3, 1e-4]},
//     "seed": 1,
//     "solver": {"max_sweeps": 500, "grad_tol": 1e-13, "stagnation_tol": 0},
//     "analysis": {"assemble": true, "curvature_product": false,
//                  "fit_window": [first, last] | null, "auto_window": 8},
//     "sweep": {"index": 2, "values": [1e-4, 5e-4, 9e-4]}     optional
//   }
// Only "name", "operator.kind", "m", "n", "k" and "spectrum.values" are
// required; everything else has the defaults shown.

#include "lrals/analysis.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lrals {

enum class SpectrumTarget {
  Solution,  // singular values of Y with A[Y] = B (equals B for identity)
  Reduced,   // singular values of C = A1^{-1/2} B A2^{-1/2} (kronecker only)
};

struct ExperimentConfig {
  std::string name;
  std::string op_kind;
  std::optional<std::uint64_t> op_seed;
  Index m = 0;
  Index n = 0;
  Index k = 0;
  SpectrumTarget target = SpectrumTarget::Solution;
  std::vector<double> spectrum;
  std::uint64_t seed = 1;
  StopCriteria stop{500, 1e-13, 0.0};
  bool assemble = true;
  bool curvature_product = false;
  std::optional<std::pair<std::size_t, std::size_t>> fit_window;
  std::size_t auto_window = 8;
  std::optional<std::size_t> sweep_index;
  std::vector<double> sweep_values;

  /// Throws ConfigError on missing/ill-typed fields or violated invariants.
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Canonical form; from_json(to_json()) reproduces the config.
  nlohmann::json to_json() const;
  void validate() const;

  std::uint64_t operator_seed() const { return op_seed.value_or(seed); }
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Identity(m, n); Kronecker with A1 = make_random_spd(m, s), A2 =
/// make_random_spd(n, s + 1); Laplace2D(n) (needs m = n); DenseSPD with
/// make_random_spd(mn, s). s is the operator seed.
HessianOperator build_operator(const ExperimentConfig& cfg);

/// Y = Q1 diag(values) Q2^T with Q1, Q2 drawn from Rng(seed, 2). Returns
/// A[Y] for SpectrumTarget::Solution and A1^{1/2} Y A2^{1/2} for Reduced.
Matrix build_B_with_spectrum(const HessianOperator& op, const std::vector<double>& values,
                             std::uint64_t seed, SpectrumTarget target = SpectrumTarget::Solution);

struct RunOptions {
  std::filesystem::path out_dir = "results";
  bool write_files = true;
  bool solve = true;  // false: analysis only (rate subcommand)
};

struct ExperimentResult {
  ExperimentConfig config;
  Matrix reference;
  double reference_norm = 0.0;
  std::optional<IterationTrace> trace;
  RateReport report;
  std::vector<std::filesystem::path> files;
};

/// Builds the problem, computes the reference Xbar, runs ALS from
/// random_start(m, n, k, seed) and fills the rate report. Writes
/// <name>.csv (when solving) and <name>.json into out_dir. Errors are
/// rethrown with the config name prefixed.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// One run per sweep value (spectrum[index] replaced), outputs named
/// <name>_<i>, plus the aggregate <name>_sweep.json.
std::vector<ExperimentResult> run_sweep(const ExperimentConfig& cfg,
                                        const RunOptions& options = {});

nlohmann::json report_to_json(const RateReport& report);

/// Per-sweep rows: sweep, ||X_l - Xbar|| / ||Xbar||, ||P grad f(X_l)|| / ||P grad f(X_0)||.
std::string trace_csv(const IterationTrace& trace, double reference_norm);

nlohmann::json result_to_json(const ExperimentResult& result);

}  // namespace lrals
