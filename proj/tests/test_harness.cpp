#include "lrals/errors.hpp"
#include "lrals/harness.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace lrals;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = LRALS_CONFIG_DIR;
const fs::path kGolden = LRALS_GOLDEN_DIR;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lrals_test_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json minimal() {
  return json{{"name", "t"}, {"operator", {{"kind", "identity"}}}, {"m", 6}, {"n", 5}, {"k", 2},
              {"spectrum", {{"values", {1.0, 0.5, 0.1}}}}};
}

std::vector<std::vector<double>> parse_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

oracle::Vector sv(const Matrix& X) { return Eigen::JacobiSVD<Matrix>(X).singularValues(); }

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults and round trip") {
    const ExperimentConfig c = ExperimentConfig::from_json(minimal());
    CHECK(c.seed == 1);
    CHECK(c.stop.max_sweeps == 500);
    CHECK(c.stop.grad_tol == 1e-13);
    CHECK(c.assemble);
    CHECK_FALSE(c.curvature_product);
    CHECK(c.auto_window == 8);
    CHECK(c.target == SpectrumTarget::Solution);
    CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
  }
  SUBCASE("every shipped config loads and round trips") {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
      if (entry.path().extension() != ".json") continue;
      CAPTURE(entry.path().string());
      const ExperimentConfig c = load_config(entry.path());
      CHECK(c.name == entry.path().stem().string());
      CHECK(ExperimentConfig::from_json(c.to_json()).to_json() == c.to_json());
      ++count;
    }
    CHECK(count >= 8);
  }
  SUBCASE("malformed configs") {
    auto bad = [](auto mutate) {
      json j = minimal();
      mutate(j);
      return j;
    };
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j.erase("k"); })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["m"] = "six"; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["extra"] = 1; })), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["operator"]["kind"] = "sparse"; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["k"] = 4; })), ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(bad([](json& j) { j["spectrum"]["values"] = {1.0, 2.0}; })),
        ConfigError);
    CHECK_THROWS_AS(
        ExperimentConfig::from_json(bad([](json& j) { j["spectrum"]["values"] = {1.0, 0.0, 0.0}; })),
        ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["spectrum"]["target"] = "reduced"; })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) {
                      j["operator"]["kind"] = "laplace2d";
                    })),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad([](json& j) { j["analysis"] = {{"auto_window", 3}}; })),
                    ConfigError);
    CHECK_THROWS_AS(load_config(kConfigs / "does_not_exist.json"), ConfigError);
    const fs::path dir = scratch("badjson");
    std::ofstream(dir / "broken.json") << "{\"name\": ";
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
  }
}

TEST_CASE("right-hand sides with a prescribed spectrum") {
  SUBCASE("identity") {
    const auto op = HessianOperator::identity(7, 5);
    const Matrix B = build_B_with_spectrum(op, {1.0, 0.5}, 3);
    const oracle::Vector s = sv(B);
    CHECK(std::abs(s(0) - 1.0) <= 1e-12);
    CHECK(std::abs(s(1) - 0.5) <= 1e-12);
    CHECK(s(2) <= 1e-12);
  }
  SUBCASE("laplace2d: singular values of the unconstrained solution") {
    const Index n = 20;
    const auto op = HessianOperator::laplace2d(n);
    const std::vector<double> values{1.0, 1e-3, 5e-4};
    const Matrix B = build_B_with_spectrum(op, values, 1);
    const double h2 = static_cast<double>((n + 1) * (n + 1));
    Matrix D = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      D(i, i) = 2.0 * h2;
      if (i + 1 < n) D(i, i + 1) = D(i + 1, i) = -h2;
    }
    const Matrix I = Matrix::Identity(n, n);
    const Matrix A = oracle::kron(I, D) + oracle::kron(D, I);
    const Matrix Y = oracle::unvec(A.ldlt().solve(oracle::vec(B)), n, n);
    const oracle::Vector s = sv(Y);
    for (std::size_t i = 0; i < values.size(); ++i) CHECK(std::abs(s(i) - values[i]) <= 1e-10);
    CHECK(s(3) <= 1e-10);
  }
  SUBCASE("kronecker reduced target") {
    const Matrix A1 = make_random_spd(6, 4), A2 = make_random_spd(5, 5);
    const auto op = HessianOperator::kronecker(A1, A2);
    const Matrix B = build_B_with_spectrum(op, {1.0, 0.2, 0.05}, 2, SpectrumTarget::Reduced);
    Eigen::SelfAdjointEigenSolver<Matrix> e1(A1), e2(A2);
    const Matrix C = e1.operatorInverseSqrt() * B * e2.operatorInverseSqrt();
    const oracle::Vector s = sv(C);
    CHECK(std::abs(s(0) - 1.0) <= 1e-10);
    CHECK(std::abs(s(1) - 0.2) <= 1e-10);
    CHECK(std::abs(s(2) - 0.05) <= 1e-10);
    CHECK_THROWS_AS(build_B_with_spectrum(HessianOperator::identity(6, 5), {1.0}, 1, SpectrumTarget::Reduced),
                    PreconditionError);
  }
  SUBCASE("deterministic and dimension-checked") {
    const auto op = HessianOperator::identity(6, 5);
    CHECK((build_B_with_spectrum(op, {1.0, 0.5}, 9) - build_B_with_spectrum(op, {1.0, 0.5}, 9)).norm() == 0.0);
    CHECK((build_B_with_spectrum(op, {1.0, 0.5}, 9) - build_B_with_spectrum(op, {1.0, 0.5}, 10)).norm() > 0.1);
    CHECK_THROWS_AS(build_B_with_spectrum(op, std::vector<double>(6, 1.0), 1), DimensionError);
  }
}

TEST_CASE("run_experiment outputs") {
  const fs::path dir = scratch("run");
  ExperimentConfig c = ExperimentConfig::from_json(minimal());
  c.m = 8;
  c.n = 7;
  c.name = "small";
  RunOptions opt;
  opt.out_dir = dir;
  const ExperimentResult r = run_experiment(c, opt);
  REQUIRE(r.files.size() == 2);
  const std::string csv = slurp(dir / "small.csv");
  const std::string js = slurp(dir / "small.json");

  SUBCASE("csv layout") {
    CHECK(csv.rfind("sweep,rel_error,rel_projected_residual\n", 0) == 0);
    const auto rows = parse_csv(csv);
    CHECK(rows.size() == r.trace->records.size());
    CHECK(rows.front()[0] == 0.0);
    CHECK(rows.front()[2] == 1.0);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i][0] == static_cast<double>(i));
    // 17 significant digits: values reparse exactly
    for (std::size_t i = 0; i < rows.size(); ++i)
      CHECK(rows[i][1] == *r.trace->records[i].error / r.reference_norm);
  }
  SUBCASE("json echoes the config and the report") {
    const json j = json::parse(js);
    CHECK(j["config"] == c.to_json());
    CHECK(j["report"]["rho_assembled"].get<double>() == doctest::Approx(0.04).epsilon(1e-8));
    CHECK(j["report"]["rho_theoretical"].get<double>() == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(j["run"]["sweeps"].get<std::size_t>() == r.trace->records.back().sweep);
    CHECK(j["reference_norm"].get<double>() == r.reference_norm);
  }
  SUBCASE("repeat runs are byte-identical") {
    const fs::path dir2 = scratch("run2");
    RunOptions opt2;
    opt2.out_dir = dir2;
    run_experiment(c, opt2);
    CHECK(slurp(dir2 / "small.csv") == csv);
    CHECK(slurp(dir2 / "small.json") == js);
  }
}

TEST_CASE("run_experiment behaviour") {
  RunOptions quiet;
  quiet.write_files = false;
  SUBCASE("exact rank k: one sweep") {
    json j = minimal();
    j["spectrum"]["values"] = {1.0, 1e-3};
    const ExperimentResult r = run_experiment(ExperimentConfig::from_json(j), quiet);
    REQUIRE(r.trace->records.size() >= 2);
    CHECK(*r.trace->records[1].error / r.reference_norm <= 1e-12);
    CHECK(*r.report.rho_theoretical == 0.0);
    CHECK(*r.report.rho_assembled <= 1e-12);
  }
  SUBCASE("laplace with zero gradient at the solution") {
    const ExperimentConfig c = load_config(kConfigs / "zero_gradient_laplace.json");
    const ExperimentResult r = run_experiment(c, quiet);
    CHECK(*r.report.rho_assembled < 1.0);
    CHECK_FALSE(r.report.rho_theoretical.has_value());
    CHECK(r.trace->reason == StopReason::GradientTolerance);
    CHECK(*r.trace->records.back().error / r.reference_norm <= 1e-10);
  }
  SUBCASE("rate only") {
    const fs::path dir = scratch("rate");
    RunOptions opt;
    opt.out_dir = dir;
    opt.solve = false;
    const ExperimentResult r = run_experiment(ExperimentConfig::from_json(minimal()), opt);
    CHECK_FALSE(r.trace.has_value());
    CHECK_FALSE(fs::exists(dir / "t.csv"));
    const json j = json::parse(slurp(dir / "t.json"));
    CHECK(j["run"].is_null());
    CHECK(j["report"]["slope_observed"].is_null());
  }
  SUBCASE("assembly disabled leaves a note") {
    ExperimentConfig c = ExperimentConfig::from_json(minimal());
    c.assemble = false;
    const ExperimentResult r = run_experiment(c, quiet);
    CHECK_FALSE(r.report.rho_assembled.has_value());
    CHECK_FALSE(r.report.notes.empty());
  }
  SUBCASE("errors carry the experiment name") {
    json j = minimal();
    j["name"] = "broken_case";
    const fs::path dir = scratch("blocked");
    std::ofstream(dir / "file") << "x";
    RunOptions blocked;
    blocked.out_dir = dir / "file" / "sub";
    try {
      run_experiment(ExperimentConfig::from_json(j), blocked);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("experiment 'broken_case'") != std::string::npos);
    }
  }
}

TEST_CASE("run_sweep") {
  const fs::path dir = scratch("sweep");
  json j = minimal();
  j["name"] = "sw";
  j["sweep"] = {{"index", 2}, {"values", {0.1, 0.2, 0.4}}};
  RunOptions opt;
  opt.out_dir = dir;
  const auto results = run_sweep(ExperimentConfig::from_json(j), opt);
  REQUIRE(results.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(fs::exists(dir / ("sw_" + std::to_string(i) + ".csv")));
    CHECK(fs::exists(dir / ("sw_" + std::to_string(i) + ".json")));
  }
  const json agg = json::parse(slurp(dir / "sw_sweep.json"));
  REQUIRE(agg["runs"].size() == 3);
  double prev = 0.0;
  for (const auto& run : agg["runs"]) {
    const double s3 = run["value"].get<double>();
    const double rho = run["report"]["rho_assembled"].get<double>();
    CHECK(rho == doctest::Approx(s3 * s3 / 0.25).epsilon(1e-8));
    CHECK(rho > prev);
    prev = rho;
  }
  CHECK_THROWS_AS(run_sweep(ExperimentConfig::from_json(minimal()), opt), ConfigError);
}

TEST_CASE("golden trace for the identity configuration") {
  ExperimentConfig c = load_config(kConfigs / "fig1a_identity.json");
  c.assemble = false;
  RunOptions quiet;
  quiet.write_files = false;
  const ExperimentResult r = run_experiment(c, quiet);
  const auto got = parse_csv(trace_csv(*r.trace, r.reference_norm));
  const auto want = parse_csv(slurp(kGolden / "fig1a_identity.csv"));
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(got[i][0] == want[i][0]);
    for (int c2 = 1; c2 < 3; ++c2)
      CHECK(std::abs(got[i][c2] - want[i][c2]) <= 1e-9 * std::max(want[i][c2], 1e-4));
  }
}
