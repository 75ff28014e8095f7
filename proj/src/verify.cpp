#include "lrals/verify.hpp"

#include "lrals/errors.hpp"
#include "lrals/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace lrals {

namespace {

class Suite {
 public:
  void at_most(const std::string& name, double value, double tol, std::string detail = {}) {
    results_.push_back({name, value <= tol, value, tol, std::move(detail)});
  }
  void at_least(const std::string& name, double value, double tol, std::string detail = {}) {
    results_.push_back({name, value >= tol, value, tol, std::move(detail)});
  }
  // Runs `body`; any exception becomes a failed check of that name.
  void guarded(const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      results_.push_back({name, false, 0.0, 0.0, std::string("error: ") + e.what()});
    }
  }
  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  std::vector<CheckResult> results_;
};

Matrix random_rank_k(Rng& rng, Index m, Index n, Index k) {
  return rng.gaussian(m, k) * rng.gaussian(k, n);
}

QuadraticProblem make_problem(const HessianOperator& op, std::vector<double> spectrum, Index k,
                              std::uint64_t seed) {
  return QuadraticProblem(op, build_B_with_spectrum(op, spectrum, seed), k);
}

Matrix assembled_tangent_projector(const ProjectorBundle& b) {
  return assemble_linear_map(b.base().rows(), b.base().cols(),
                             [&](const Matrix& Z) { return b.project_tangent(Z); });
}

void geometry_checks(Suite& s, std::uint64_t seed) {
  s.guarded("projector identities", [&] {
    Rng rng(seed, 10);
    double idem = 0.0, adj = 0.0, comm = 0.0;
    for (int t = 0; t < 10; ++t) {
      const ProjectorBundle b(random_rank_k(rng, 6, 5, 2));
      const Matrix Z = rng.gaussian(6, 5);
      const Matrix W = rng.gaussian(6, 5);
      for (Side side : {Side::Row, Side::Col}) {
        const Matrix PZ = b.project(side, Z);
        idem = std::max(idem, (b.project(side, PZ) - PZ).norm() / Z.norm());
        adj = std::max(adj, std::abs(frobenius_inner(PZ, W) - frobenius_inner(Z, b.project(side, W))) /
                                (Z.norm() * W.norm()));
      }
      const Matrix PZ = b.project_tangent(Z);
      idem = std::max(idem, (b.project_tangent(PZ) - PZ).norm() / Z.norm());
      comm = std::max(comm, (b.project_row(b.project_col(Z)) - b.project_col(b.project_row(Z))).norm() /
                                Z.norm());
    }
    s.at_most("projector idempotence", idem, 1e-12);
    s.at_most("projector self-adjointness", adj, 1e-12);
    s.at_most("projector commutation", comm, 1e-12);
  });

  s.guarded("tangent dimension", [&] {
    Rng rng(seed, 11);
    double worst = 0.0;
    std::ostringstream detail;
    for (auto [m, n, k] : {std::tuple<Index, Index, Index>{5, 4, 2}, {6, 6, 3}}) {
      const Matrix P = assembled_tangent_projector(ProjectorBundle(random_rank_k(rng, m, n, k)));
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (P + P.transpose()));
      const Index rank = (eig.eigenvalues().array() > 0.5).count();
      const double expected = static_cast<double>(k * (m + n - k));
      worst = std::max(worst, std::abs(static_cast<double>(rank) - expected));
      detail << "(" << m << "," << n << "," << k << "): " << rank << " ";
    }
    s.at_most("tangent dimension k(m+n-k)", worst, 0.0, detail.str());
  });

  s.guarded("projector derivatives", [&] {
    Rng rng(seed, 12);
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const Index k = 2;
      const Matrix X = random_rank_k(rng, 6, 5, k);
      const ProjectorBundle b(X);
      const Matrix H = b.project_tangent(rng.gaussian(6, 5));
      const Matrix Z = rng.gaussian(6, 5);
      const Matrix fd1 = (extended_project_row(X + h * H, k, Z) - extended_project_row(X - h * H, k, Z)) / (2 * h);
      const Matrix fd2 = (extended_project_col(X + h * H, k, Z) - extended_project_col(X - h * H, k, Z)) / (2 * h);
      worst = std::max(worst, relative_error(b.d_row(H, Z), fd1));
      worst = std::max(worst, relative_error(b.d_col(H, Z), fd2));
    }
    s.at_most("dP_i vs central differences", worst, 1e-6);
  });

  s.guarded("curvature vanishes on T_i", [&] {
    const auto op = HessianOperator::identity(6, 5);
    const QuadraticProblem p = make_problem(op, {1.0, 0.5, 0.2, 0.1}, 2, seed);
    const Matrix Xbar = reference_solution(p, random_start(6, 5, 2, seed));
    const Matrix G = p.gradient(Xbar);
    const ProjectorBundle b(Xbar);
    Rng rng(seed, 13);
    double worst = 0.0;
    for (Side side : {Side::Row, Side::Col}) {
      const Matrix H = b.project(side, rng.gaussian(6, 5));
      worst = std::max(worst, curvature_N(Xbar, G, H, side).norm() /
                                  (G.norm() * H.norm() * b.pseudo_inverse().norm()));
    }
    s.at_most("N_i = 0 on T_i(Xbar)", worst, 1e-12);
  });
}

void structure_checks(Suite& s, const std::string& label, const QuadraticProblem& p,
                      const Matrix& Xbar) {
  s.guarded("S' structure (" + label + ")", [&] {
    const LinearizedAlsMap map(p, Xbar);
    const Matrix Sp = assemble_S_prime(p, Xbar);
    const Matrix P = assembled_tangent_projector(map.projectors());
    const Index dim = P.rows();
    const Matrix Q = Matrix::Identity(dim, dim) - P;
    s.at_most("(I-P)S'(I-P) = I-P (" + label + ")", (Q * Sp * Q - Q).norm() / Q.norm(), 1e-10);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (P + P.transpose()));
    std::vector<Index> normal;
    for (Index i = 0; i < dim; ++i)
      if (eig.eigenvalues()(i) < 0.5) normal.push_back(i);
    Matrix basis(dim, static_cast<Index>(normal.size()));
    for (std::size_t c = 0; c < normal.size(); ++c) basis.col(static_cast<Index>(c)) = eig.eigenvectors().col(normal[c]);
    const Vector sv = singular_values(Sp * basis);
    s.at_least("singular values of S' on T^perp (" + label + ")", sv(sv.size() - 1), 1.0 - 1e-8);

    const double rho_sp = spectral_radius(Sp * P);
    const double rho_psp = spectral_radius(P * Sp * P);
    s.at_most("rho(S'P) = rho(PS'P) (" + label + ")", std::abs(rho_sp - rho_psp) / std::max(rho_psp, 1e-300), 1e-8);
    s.at_most("rho(S'P) < 1 (" + label + ")", rho_sp, 1.0 - 1e-12);
  });
}

void rate_checks(Suite& s, std::uint64_t seed) {
  s.guarded("identity rate", [&] {
    const QuadraticProblem p = make_problem(HessianOperator::identity(7, 6), {1.0, 0.4, 0.1, 0.05}, 2, seed);
    const Matrix Xbar = reference_solution(p, random_start(7, 6, 2, seed));
    structure_checks(s, "identity", p, Xbar);
    const double rho = rho_assembled(p, Xbar);
    const double theory = *theoretical_rate(p);
    s.at_most("identity: rho_assembled = (s3/s2)^2", std::abs(rho - theory) / theory, 1e-8);
    const double rho_cp = rho_via_curvature_product(p, Xbar);
    s.at_most("identity: curvature product rho = rho_assembled", std::abs(rho_cp - rho) / rho, 1e-8);
  });

  s.guarded("eigen-structure", [&] {
    // (X^+)^T X^+ (x) G G^T has eigenvalues s_j^2 / s_i^2 (i <= k < j) and 0.
    const QuadraticProblem p = make_problem(HessianOperator::identity(5, 4), {1.0, 0.4, 0.1, 0.05}, 2, seed);
    const Matrix Xbar = reference_solution(p, random_start(5, 4, 2, seed));
    const Matrix Xp = pinv(Xbar);
    const Matrix G = Xbar - p.rhs();
    const Matrix M = kronecker_product(Xp.transpose() * Xp, G * G.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
    const Vector sig = singular_values(p.rhs());
    std::vector<double> expected(static_cast<std::size_t>(M.rows()), 0.0);
    std::size_t pos = 0;
    for (Index i = 0; i < 2; ++i)
      for (Index j = 2; j < sig.size(); ++j) expected[pos++] = sig(j) * sig(j) / (sig(i) * sig(i));
    std::sort(expected.begin(), expected.end());
    double worst = 0.0;
    for (Index i = 0; i < M.rows(); ++i)
      worst = std::max(worst, std::abs(eig.eigenvalues()(i) - expected[static_cast<std::size_t>(i)]));
    s.at_most("identity: eigen-structure of X^+ (x) G", worst / expected.back(), 1e-10);
  });

  s.guarded("kronecker rate", [&] {
    const auto op = HessianOperator::kronecker(make_random_spd(6, seed), make_random_spd(5, seed + 1));
    const QuadraticProblem p(op, build_B_with_spectrum(op, {1.0, 0.3, 0.1, 0.02}, seed, SpectrumTarget::Reduced), 2);
    const Matrix Xbar = reference_solution(p, random_start(6, 5, 2, seed));
    structure_checks(s, "kronecker", p, Xbar);
    const double rho = rho_assembled(p, Xbar);
    const double theory = *theoretical_rate(p);
    s.at_most("kronecker: rho_assembled = (c3/c2)^2", std::abs(rho - theory) / theory, 1e-8);
  });

  s.guarded("laplace rate", [&] {
    const QuadraticProblem p = make_problem(HessianOperator::laplace2d(5), {1.0, 0.3, 0.1, 0.02}, 2, seed);
    const Matrix Xbar = reference_solution(p, random_start(5, 5, 2, seed));
    structure_checks(s, "laplace2d", p, Xbar);
  });

  s.guarded("zero-gradient rate", [&] {
    const QuadraticProblem p = make_problem(HessianOperator::laplace2d(5), {1.0, 0.3}, 2, seed);
    const Matrix Xbar = reference_solution(p, random_start(5, 5, 2, seed));
    s.at_most("zero gradient: rho_assembled < 1", rho_assembled(p, Xbar), 1.0 - 1e-12);
  });
}

void solver_checks(Suite& s, std::uint64_t seed) {
  s.guarded("ALS = orthogonal iteration", [&] {
    const QuadraticProblem p = make_problem(HessianOperator::identity(8, 7), {1.0, 0.5, 0.3, 0.1}, 2, seed);
    const LowRankState x0 = random_start(8, 7, 2, seed);
    const auto oi = orthogonal_iteration(p.rhs(), 2, x0.V, 10);
    LowRankState x = x0;
    double worst = 0.0;
    for (const LowRankState& y : oi) {
      x = als_sweep(p, x);
      worst = std::max(worst, relative_error(x.dense(), y.dense()));
    }
    s.at_most("identity ALS iterates = orthogonal iteration", worst, 1e-10);
  });

  s.guarded("kronecker reduction", [&] {
    const auto op = HessianOperator::kronecker(make_random_spd(6, seed + 2), make_random_spd(5, seed + 3));
    const QuadraticProblem p = make_problem(op, {1.0, 0.5, 0.3, 0.1}, 2, seed);
    const LowRankState x0 = random_start(6, 5, 2, seed);
    const auto reduced = kronecker_reduced_run(op.left_factor(), op.right_factor(), p.rhs(), 2, x0, 10);
    LowRankState x = x0;
    double worst = 0.0;
    for (const Matrix& y : reduced) {
      x = als_sweep(p, x);
      worst = std::max(worst, relative_error(x.dense(), y));
    }
    s.at_most("kronecker ALS iterates = mapped block power iterates", worst, 1e-10);
  });

  s.guarded("objective monotone", [&] {
    const std::vector<HessianOperator> ops = {
        HessianOperator::identity(6, 5),
        HessianOperator::kronecker(make_random_spd(6, seed), make_random_spd(5, seed + 1)),
        HessianOperator::laplace2d(6),
        HessianOperator::dense_spd(make_random_spd(20, seed), 5, 4)};
    double worst = 0.0;
    for (const HessianOperator& op : ops) {
      const QuadraticProblem p = make_problem(op, {1.0, 0.5, 0.2, 0.1}, 2, seed);
      StopCriteria stop;
      stop.max_sweeps = 30;
      stop.grad_tol = 0.0;
      const AlsResult r = als_run(p, random_start(op.rows(), op.cols(), 2, seed), stop);
      for (std::size_t l = 1; l < r.trace.records.size(); ++l) {
        const double prev = r.trace.records[l - 1].objective;
        const double increase = r.trace.records[l].objective - prev;
        worst = std::max(worst, increase / std::max(1.0, std::abs(prev)));
      }
    }
    s.at_most("f non-increasing per sweep (all kinds)", worst, 1e-12);
  });

  s.guarded("determinism", [&] {
    ExperimentConfig cfg;
    cfg.name = "verify_determinism";
    cfg.op_kind = "laplace2d";
    cfg.m = cfg.n = 6;
    cfg.k = 2;
    cfg.spectrum = {1.0, 1e-1, 1e-2};
    cfg.seed = seed;
    RunOptions opts;
    opts.write_files = false;
    const ExperimentResult a = run_experiment(cfg, opts);
    const ExperimentResult b = run_experiment(cfg, opts);
    const bool same = trace_csv(*a.trace, a.reference_norm) == trace_csv(*b.trace, b.reference_norm) &&
                      result_to_json(a).dump() == result_to_json(b).dump();
    s.at_most("identical outputs for identical seeds", same ? 0.0 : 1.0, 0.0);
  });
}

}  // namespace

std::vector<CheckResult> run_invariant_suite(std::uint64_t seed) {
  Suite s;
  geometry_checks(s, seed);
  rate_checks(s, seed);
  solver_checks(s, seed);
  return s.take();
}

}  // namespace lrals
