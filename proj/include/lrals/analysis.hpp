#pragma once

// Local convergence analysis of ALS at a fixed point Xbar.
//
// With Pi = Pi(Xbar), Bi = (Pi A Pi)^{-1} on Ti(Xbar), Pi^A = Bi Pi A and
// Ni[H] = Pi'(Xbar; H)[grad f(Xbar)], the linearized sweep is
//
//   S'(Xbar) = [(I - P2^A) - B2 N2] [(I - P1^A) - B1 N1]
//
// and the local rate is the spectral radius of S'(Xbar) P(Xbar).

#include "lrals/solvers.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lrals {

/// S'(Xbar) and its building blocks. Holds a reference to the problem, which
/// must outlive the map. Immutable after construction.
class LinearizedAlsMap {
 public:
  /// Runs the critical-point check on grad f(Xbar). When check.scale is 0 the
  /// Frobenius norm of the right-hand side B is used as scale.
  LinearizedAlsMap(const QuadraticProblem& p, const Matrix& Xbar, CriticalPointCheck check = {});

  /// S'(Xbar)[H].
  Matrix apply(const Matrix& H) const;
  /// S_i'(Xbar)[H] = H - Bi Pi A H - Bi Ni H.
  Matrix apply_step(Side side, const Matrix& H) const;
  /// Pi^A H = Bi Pi A H, the A-orthogonal projection onto Ti(Xbar).
  Matrix a_projection(Side side, const Matrix& H) const;
  /// Bi Pi G: solves the restricted system on Ti(Xbar) for Pi G.
  Matrix restricted_inverse(Side side, const Matrix& G) const;
  /// Ni H (H projected onto T(Xbar) first).
  Matrix curvature(Side side, const Matrix& H) const;
  /// B2 N2 B1 N1 P H.
  Matrix curvature_product(const Matrix& H) const;

  const ProjectorBundle& projectors() const { return bundle_; }
  const Matrix& gradient() const { return gradient_; }
  Index rows() const { return bundle_.base().rows(); }
  Index cols() const { return bundle_.base().cols(); }

 private:
  const QuadraticProblem* problem_;
  ProjectorBundle bundle_;
  Matrix gradient_;
  RowSubspaceSystem row_system_;
  ColSubspaceSystem col_system_;
};

Matrix apply_S_prime(const QuadraticProblem& p, const Matrix& Xbar, const Matrix& H);

using LinearMap = std::function<Matrix(const Matrix&)>;

/// Matrix of a linear map on R^{rows x cols}: column j is vec(map(unvec(e_j))).
/// Columns are computed independently (in parallel when threads > 1), so the
/// result does not depend on the schedule. threads = 0 picks the hardware
/// concurrency.
Matrix assemble_linear_map(Index rows, Index cols, const LinearMap& map, unsigned threads = 0);

/// Matrix representation of S'(Xbar) (mn x mn).
Matrix assemble_S_prime(const QuadraticProblem& p, const Matrix& Xbar);
/// Matrix representation of S'(Xbar) P(Xbar).
Matrix assemble_S_prime_tangent(const QuadraticProblem& p, const Matrix& Xbar);

/// max |lambda| over the full complex spectrum (LAPACK dgeev).
double spectral_radius(const Matrix& M);

/// rho(S'(Xbar) P) from the assembled representation.
double rho_assembled(const QuadraticProblem& p, const Matrix& Xbar);

/// rho(B2 N2 B1 N1 P). Valid for the Identity and Kronecker kinds only;
/// other kinds throw PreconditionError.
double rho_via_curvature_product(const QuadraticProblem& p, const Matrix& Xbar);

/// Singular values of the operator whose local rate is predicted in closed
/// form: B for Identity, C = A1^{-1/2} B A2^{-1/2} for Kronecker. Empty for
/// other kinds.
Vector rate_spectrum(const QuadraticProblem& p);

/// (s_{k+1}/s_k)^2 over rate_spectrum; 0 when s_{k+1} <= 1e-12 s_1
/// (numerically zero) or k = min(m, n);
/// nullopt for Laplace2D/DenseSPD. Throws PreconditionError when
/// s_k = s_{k+1} within 1e-12 relative.
std::optional<double> theoretical_rate(const QuadraticProblem& p);

/// The fixed point the analysis linearizes at: truncated SVD of B (Identity),
/// A1^{-1/2} trunc_k(C) A2^{-1/2} polished by ALS sweeps (Kronecker), or the
/// ALS limit from `start` (other kinds): ALS to grad_tol 1e-12, then as many
/// sweeps again.
Matrix reference_solution(const QuadraticProblem& p, const LowRankState& start,
                          std::size_t max_sweeps = 5000);

struct SlopeFit {
  double factor = 0.0;       // exp(slope of log error vs sweep)
  std::size_t first = 0;     // sweep index range used
  std::size_t last = 0;
};

/// Per-sweep error contraction fitted by least squares to log ||X_l - Xbar||.
/// Points at or below the saturation floor 100 eps ||Xbar|| are discarded.
/// Without an explicit window the fit uses the last `auto_window` sweeps of
/// the strictly decreasing stretch (from sweep 2 on) that ends just before
/// saturation, where saturation also covers errors within 10x of the smallest
/// one in the run.
/// Needs at least 4 usable points (PreconditionError).
SlopeFit observed_slope(const IterationTrace& trace, double reference_norm,
                        std::optional<std::pair<std::size_t, std::size_t>> window = std::nullopt,
                        std::size_t auto_window = 8);

/// Fit on a bare error sequence (index = sweep).
SlopeFit observed_slope(const std::vector<double>& errors, double reference_norm,
                        std::optional<std::pair<std::size_t, std::size_t>> window = std::nullopt,
                        std::size_t auto_window = 8);

struct RateReport {
  std::optional<double> rho_assembled;
  std::optional<double> rho_theoretical;
  std::optional<double> rho_curvature_product;
  std::optional<double> slope_observed;
  std::optional<std::pair<std::size_t, std::size_t>> fit_window;
  std::optional<double> slope_vs_assembled;       // |slope - rho_a| / rho_a
  std::optional<double> assembled_vs_theoretical;  // |rho_a - rho_t| / rho_t
  std::vector<std::string> notes;
};

}  // namespace lrals
