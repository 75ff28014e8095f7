#include "lrals/harness.hpp"

#include "lrals/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lrals {

using nlohmann::json;

namespace {

constexpr std::uint64_t kRhsStream = 2;

[[noreturn]] void config_error(const std::string& what) { throw ConfigError("config: " + what); }

void reject_unknown(const json& j, const std::string& where, std::set<std::string> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
  }
}

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) config_error("missing '" + key + "' in " + where);
  return j.at(key);
}

std::uint64_t as_unsigned(const json& v, const std::string& what) {
  const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  if (!ok) config_error(what + " must be a non-negative integer");
  return v.get<std::uint64_t>();
}

double as_number(const json& v, const std::string& what) {
  if (!v.is_number()) config_error(what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) config_error(what + " must be finite");
  return x;
}

bool as_bool(const json& v, const std::string& what) {
  if (!v.is_boolean()) config_error(what + " must be true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& what) {
  if (!v.is_string()) config_error(what + " must be a string");
  return v.get<std::string>();
}

std::vector<double> as_number_list(const json& v, const std::string& what) {
  if (!v.is_array()) config_error(what + " must be an array of numbers");
  std::vector<double> out;
  for (const json& x : v) out.push_back(as_number(x, what));
  return out;
}

const char* target_name(SpectrumTarget t) {
  return t == SpectrumTarget::Reduced ? "reduced" : "solution";
}

void validate_spectrum(const std::vector<double>& values, Index m, Index n) {
  if (values.empty()) throw PreconditionError("spectrum is empty");
  if (static_cast<Index>(values.size()) > std::min(m, n)) {
    throw DimensionError("spectrum has " + std::to_string(values.size()) +
                         " values, more than min(m, n) = " + std::to_string(std::min(m, n)));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i])) {
      throw PreconditionError("spectrum values must be finite and non-negative");
    }
    if (i > 0 && values[i] > values[i - 1]) {
      throw PreconditionError("spectrum values must be non-increasing");
    }
  }
}

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) config_error("top level must be an object");
  reject_unknown(j, "config",
                 {"name", "operator", "m", "n", "k", "spectrum", "seed", "solver", "analysis",
                  "sweep"});
  ExperimentConfig cfg;
  cfg.name = as_string(require(j, "name", "config"), "name");

  const json& op = require(j, "operator", "config");
  reject_unknown(op, "operator", {"kind", "seed"});
  cfg.op_kind = as_string(require(op, "kind", "operator"), "operator.kind");
  if (op.contains("seed")) cfg.op_seed = as_unsigned(op.at("seed"), "operator.seed");

  cfg.m = static_cast<Index>(as_unsigned(require(j, "m", "config"), "m"));
  cfg.n = static_cast<Index>(as_unsigned(require(j, "n", "config"), "n"));
  cfg.k = static_cast<Index>(as_unsigned(require(j, "k", "config"), "k"));

  const json& spec = require(j, "spectrum", "config");
  reject_unknown(spec, "spectrum", {"target", "values"});
  if (spec.contains("target")) {
    const std::string t = as_string(spec.at("target"), "spectrum.target");
    if (t == "solution") cfg.target = SpectrumTarget::Solution;
    else if (t == "reduced") cfg.target = SpectrumTarget::Reduced;
    else config_error("spectrum.target must be 'solution' or 'reduced', got '" + t + "'");
  }
  cfg.spectrum = as_number_list(require(spec, "values", "spectrum"), "spectrum.values");

  if (j.contains("seed")) cfg.seed = as_unsigned(j.at("seed"), "seed");

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown(s, "solver", {"max_sweeps", "grad_tol", "stagnation_tol"});
    if (s.contains("max_sweeps")) cfg.stop.max_sweeps = as_unsigned(s.at("max_sweeps"), "solver.max_sweeps");
    if (s.contains("grad_tol")) cfg.stop.grad_tol = as_number(s.at("grad_tol"), "solver.grad_tol");
    if (s.contains("stagnation_tol")) {
      cfg.stop.stagnation_tol = as_number(s.at("stagnation_tol"), "solver.stagnation_tol");
    }
  }

  if (j.contains("analysis")) {
    const json& a = j.at("analysis");
    reject_unknown(a, "analysis", {"assemble", "curvature_product", "fit_window", "auto_window"});
    if (a.contains("assemble")) cfg.assemble = as_bool(a.at("assemble"), "analysis.assemble");
    if (a.contains("curvature_product")) {
      cfg.curvature_product = as_bool(a.at("curvature_product"), "analysis.curvature_product");
    }
    if (a.contains("fit_window") && !a.at("fit_window").is_null()) {
      const json& w = a.at("fit_window");
      if (!w.is_array() || w.size() != 2) config_error("analysis.fit_window must be [first, last]");
      cfg.fit_window = std::make_pair(as_unsigned(w[0], "analysis.fit_window"),
                                      as_unsigned(w[1], "analysis.fit_window"));
    }
    if (a.contains("auto_window")) cfg.auto_window = as_unsigned(a.at("auto_window"), "analysis.auto_window");
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, "sweep", {"index", "values"});
    cfg.sweep_index = as_unsigned(require(s, "index", "sweep"), "sweep.index");
    cfg.sweep_values = as_number_list(require(s, "values", "sweep"), "sweep.values");
  }

  cfg.validate();
  return cfg;
}

json ExperimentConfig::to_json() const {
  json op = {{"kind", op_kind}};
  if (op_seed) op["seed"] = *op_seed;
  json j = {
      {"name", name},
      {"operator", op},
      {"m", m},
      {"n", n},
      {"k", k},
      {"spectrum", {{"target", target_name(target)}, {"values", spectrum}}},
      {"seed", seed},
      {"solver",
       {{"max_sweeps", stop.max_sweeps},
        {"grad_tol", stop.grad_tol},
        {"stagnation_tol", stop.stagnation_tol}}},
      {"analysis",
       {{"assemble", assemble},
        {"curvature_product", curvature_product},
        {"fit_window", fit_window ? json::array({fit_window->first, fit_window->second})
                                  : json(nullptr)},
        {"auto_window", auto_window}}},
  };
  if (sweep_index) j["sweep"] = {{"index", *sweep_index}, {"values", sweep_values}};
  return j;
}

void ExperimentConfig::validate() const {
  if (name.empty()) config_error("name must not be empty");
  if (name.find_first_of("/\\") != std::string::npos) config_error("name must not contain path separators");
  static const std::set<std::string> kinds = {"identity", "kronecker", "laplace2d", "dense_spd"};
  if (!kinds.count(op_kind)) config_error("unknown operator kind '" + op_kind + "'");
  if (m < 1 || n < 1) config_error("m and n must be positive");
  if (op_kind == "laplace2d" && m != n) config_error("laplace2d needs m = n");
  if (k < 1 || k > std::min(m, n)) config_error("k must lie in [1, min(m, n)]");
  if (target == SpectrumTarget::Reduced && op_kind != "kronecker") {
    config_error("spectrum.target 'reduced' is only defined for the kronecker kind");
  }
  try {
    validate_spectrum(spectrum, m, n);
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (static_cast<Index>(spectrum.size()) < k) {
    config_error("spectrum needs at least k = " + std::to_string(k) + " values");
  }
  if (spectrum[k - 1] <= 0.0) config_error("spectrum value k must be positive (rank-k target)");
  if (stop.grad_tol < 0.0 || stop.stagnation_tol < 0.0) config_error("tolerances must be non-negative");
  if (fit_window && fit_window->first > fit_window->second) config_error("fit_window is reversed");
  if (auto_window < 4) config_error("analysis.auto_window must be at least 4");
  if (sweep_index) {
    if (*sweep_index >= spectrum.size()) config_error("sweep.index is outside the spectrum");
    if (sweep_values.empty()) config_error("sweep.values is empty");
    for (double v : sweep_values) {
      std::vector<double> s = spectrum;
      s[*sweep_index] = v;
      try {
        validate_spectrum(s, m, n);
      } catch (const Error& e) {
        config_error("sweep value " + fmt17(v) + ": " + e.what());
      }
      if (s[k - 1] <= 0.0) config_error("sweep value " + fmt17(v) + " zeroes spectrum value k");
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
  try {
    return ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

HessianOperator build_operator(const ExperimentConfig& cfg) {
  const std::uint64_t s = cfg.operator_seed();
  if (cfg.op_kind == "identity") return HessianOperator::identity(cfg.m, cfg.n);
  if (cfg.op_kind == "kronecker") {
    return HessianOperator::kronecker(make_random_spd(cfg.m, s), make_random_spd(cfg.n, s + 1));
  }
  if (cfg.op_kind == "laplace2d") {
    if (cfg.m != cfg.n) throw DimensionError("laplace2d needs m = n");
    return HessianOperator::laplace2d(cfg.n);
  }
  if (cfg.op_kind == "dense_spd") {
    return HessianOperator::dense_spd(make_random_spd(cfg.m * cfg.n, s), cfg.m, cfg.n);
  }
  throw ConfigError("config: unknown operator kind '" + cfg.op_kind + "'");
}

Matrix build_B_with_spectrum(const HessianOperator& op, const std::vector<double>& values,
                             std::uint64_t seed, SpectrumTarget target) {
  validate_spectrum(values, op.rows(), op.cols());
  const Index r = static_cast<Index>(values.size());
  Rng rng(seed, kRhsStream);
  const Matrix Q1 = rng.orthonormal(op.rows(), r);
  const Matrix Q2 = rng.orthonormal(op.cols(), r);
  const Vector sigma = Eigen::Map<const Vector>(values.data(), r);
  const Matrix Y = Q1 * sigma.asDiagonal() * Q2.transpose();
  if (target == SpectrumTarget::Solution) return op.apply(Y);
  if (op.kind() != HessianOperator::Kind::Kronecker) {
    throw PreconditionError("build_B_with_spectrum: reduced target needs a kronecker operator");
  }
  return spd_sqrt(op.left_factor()) * Y * spd_sqrt(op.right_factor());
}

json report_to_json(const RateReport& r) {
  json j = {
      {"rho_assembled", optional_number(r.rho_assembled)},
      {"rho_theoretical", optional_number(r.rho_theoretical)},
      {"rho_curvature_product", optional_number(r.rho_curvature_product)},
      {"slope_observed", optional_number(r.slope_observed)},
      {"fit_window", r.fit_window ? json::array({r.fit_window->first, r.fit_window->second})
                                  : json(nullptr)},
      {"slope_vs_assembled", optional_number(r.slope_vs_assembled)},
      {"assembled_vs_theoretical", optional_number(r.assembled_vs_theoretical)},
      {"notes", r.notes},
  };
  return j;
}

std::string trace_csv(const IterationTrace& trace, double reference_norm) {
  if (trace.records.empty()) throw PreconditionError("trace_csv: empty trace");
  const double pg0 = trace.records.front().projected_gradient;
  const double err_scale = reference_norm > 0.0 ? reference_norm : 1.0;
  const double pg_scale = pg0 > 0.0 ? pg0 : 1.0;
  std::string out = "sweep,rel_error,rel_projected_residual\n";
  for (const TraceRecord& rec : trace.records) {
    if (!rec.error) throw PreconditionError("trace_csv: trace has no reference errors");
    out += std::to_string(rec.sweep) + "," + fmt17(*rec.error / err_scale) + "," +
           fmt17(rec.projected_gradient / pg_scale) + "\n";
  }
  return out;
}

json result_to_json(const ExperimentResult& result) {
  json j = {{"config", result.config.to_json()}, {"report", report_to_json(result.report)}};
  j["reference_norm"] = result.reference_norm;
  if (result.trace) {
    const IterationTrace& t = *result.trace;
    const TraceRecord& first = t.records.front();
    const TraceRecord& last = t.records.back();
    const double pg0 = first.projected_gradient > 0.0 ? first.projected_gradient : 1.0;
    const double xn = result.reference_norm > 0.0 ? result.reference_norm : 1.0;
    j["run"] = {
        {"sweeps", last.sweep},
        {"stop_reason", std::string(stop_reason_name(t.reason))},
        {"final_rel_error", *last.error / xn},
        {"final_rel_projected_residual", last.projected_gradient / pg0},
        {"final_objective", last.objective},
    };
  } else {
    j["run"] = nullptr;
  }
  return j;
}

namespace {

ExperimentResult run_experiment_unchecked(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  ExperimentResult result;
  result.config = cfg;
  const HessianOperator op = build_operator(cfg);
  Matrix B = build_B_with_spectrum(op, cfg.spectrum, cfg.seed, cfg.target);
  const QuadraticProblem p(op, std::move(B), cfg.k);
  const LowRankState x0 = random_start(cfg.m, cfg.n, cfg.k, cfg.seed);

  result.reference = reference_solution(p, x0);
  result.reference_norm = result.reference.norm();
  RateReport& report = result.report;

  if (options.solve) {
    result.trace = als_run(p, x0, cfg.stop, &result.reference).trace;
  }

  if (!cfg.assemble) {
    report.notes.push_back("assembly disabled: rho_assembled not computed");
  } else if (cfg.m * cfg.n > kMaxAssembledDim) {
    report.notes.push_back("mn = " + std::to_string(cfg.m * cfg.n) +
                           " exceeds the assembly cap: rho_assembled not computed");
  } else {
    report.rho_assembled = rho_assembled(p, result.reference);
  }

  try {
    report.rho_theoretical = theoretical_rate(p);
  } catch (const PreconditionError& e) {
    report.notes.push_back(std::string("theoretical rate refused: ") + e.what());
  }
  if (!report.rho_theoretical && rate_spectrum(p).size() == 0) {
    report.notes.push_back("no closed-form rate for operator kind " + cfg.op_kind);
  }

  if (cfg.curvature_product && cfg.m * cfg.n <= kMaxAssembledDim) {
    try {
      report.rho_curvature_product = rho_via_curvature_product(p, result.reference);
    } catch (const PreconditionError& e) {
      report.notes.push_back(std::string("curvature product skipped: ") + e.what());
    }
  }

  if (result.trace) {
    try {
      const SlopeFit fit =
          observed_slope(*result.trace, result.reference_norm, cfg.fit_window, cfg.auto_window);
      report.slope_observed = fit.factor;
      report.fit_window = std::make_pair(fit.first, fit.last);
    } catch (const PreconditionError& e) {
      report.notes.push_back(std::string("slope not fitted: ") + e.what());
    }
  }

  if (report.slope_observed && report.rho_assembled && *report.rho_assembled > 0.0) {
    report.slope_vs_assembled = relative_gap(*report.slope_observed, *report.rho_assembled);
  }
  if (report.rho_assembled && report.rho_theoretical && *report.rho_theoretical > 0.0) {
    report.assembled_vs_theoretical = relative_gap(*report.rho_assembled, *report.rho_theoretical);
  }

  if (options.write_files) {
    std::filesystem::create_directories(options.out_dir);
    if (result.trace) {
      const auto csv = options.out_dir / (cfg.name + ".csv");
      write_text(csv, trace_csv(*result.trace, result.reference_norm));
      result.files.push_back(csv);
    }
    const auto js = options.out_dir / (cfg.name + ".json");
    write_text(js, result_to_json(result).dump(2) + "\n");
    result.files.push_back(js);
  }
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  try {
    return run_experiment_unchecked(cfg, options);
  } catch (const ConfigError&) {
    throw;
  } catch (const RankDropError& e) {
    throw RankDropError("experiment '" + cfg.name + "': " + e.what());
  } catch (const CapacityError& e) {
    throw CapacityError("experiment '" + cfg.name + "': " + e.what());
  } catch (const DimensionError& e) {
    throw DimensionError("experiment '" + cfg.name + "': " + e.what());
  } catch (const SolverError& e) {
    throw SolverError("experiment '" + cfg.name + "': " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError("experiment '" + cfg.name + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error("experiment '" + cfg.name + "': " + e.what());
  }
}

std::vector<ExperimentResult> run_sweep(const ExperimentConfig& cfg, const RunOptions& options) {
  if (!cfg.sweep_index) throw ConfigError("config: '" + cfg.name + "' has no sweep section");
  std::vector<ExperimentResult> results;
  json runs = json::array();
  for (std::size_t i = 0; i < cfg.sweep_values.size(); ++i) {
    ExperimentConfig one = cfg;
    one.name = cfg.name + "_" + std::to_string(i);
    one.spectrum[*cfg.sweep_index] = cfg.sweep_values[i];
    one.sweep_index.reset();
    one.sweep_values.clear();
    results.push_back(run_experiment(one, options));
    json entry = {{"value", cfg.sweep_values[i]},
                  {"name", one.name},
                  {"report", report_to_json(results.back().report)}};
    runs.push_back(entry);
  }
  if (options.write_files) {
    std::filesystem::create_directories(options.out_dir);
    const json aggregate = {{"config", cfg.to_json()}, {"runs", runs}};
    write_text(options.out_dir / (cfg.name + "_sweep.json"), aggregate.dump(2) + "\n");
  }
  return results;
}

}  // namespace lrals
