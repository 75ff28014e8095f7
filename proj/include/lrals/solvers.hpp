#pragma once

#include "lrals/geometry.hpp"
#include "lrals/operators.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

namespace lrals {

/// f(X) = 1/2 <X, A[X]>_F - <X, B>_F minimized over rank(X) <= k.
class QuadraticProblem {
 public:
  QuadraticProblem(HessianOperator op, Matrix rhs, Index rank);

  const HessianOperator& op() const { return op_; }
  const Matrix& rhs() const { return rhs_; }
  Index rank() const { return rank_; }
  Index rows() const { return op_.rows(); }
  Index cols() const { return op_.cols(); }

  double objective(const Matrix& X) const;
  Matrix gradient(const Matrix& X) const;

  /// Unconstrained minimizer A^{-1}[B] via a dense Cholesky solve (desk scale).
  Matrix unconstrained_solution() const;

 private:
  HessianOperator op_;
  Matrix rhs_;
  Index rank_;
};

/// The restricted system (V^T (x) I) A (V (x) I) on T1 = {W V^T}: unknown W is
/// m x k. Factored once; solve() maps a right-hand side R (m x k) to the W with
/// A[W V^T] V = R. Realizes (P1 A P1)^{-1} on T1.
class RowSubspaceSystem {
 public:
  RowSubspaceSystem(const HessianOperator& op, const Matrix& V);
  Matrix solve(const Matrix& rhs) const;
  const Matrix& basis() const { return V_; }

 private:
  Index rows_;
  Matrix V_;
  Eigen::LLT<Matrix> llt_;
};

/// The restricted system (I (x) U^T) A (I (x) U) on T2 = {U W}: unknown W is
/// k x n. solve() maps R (k x n) to W with U^T A[U W] = R.
class ColSubspaceSystem {
 public:
  ColSubspaceSystem(const HessianOperator& op, const Matrix& U);
  Matrix solve(const Matrix& rhs) const;
  const Matrix& basis() const { return U_; }

 private:
  Index cols_;
  Matrix U_;
  Eigen::LLT<Matrix> llt_;
};

/// Exact minimizer U (m x k) of f(U V^T) for orthonormal V.
Matrix als_half_row(const QuadraticProblem& p, const Matrix& V);
/// Exact minimizer V (n x k) of f(U V^T) for orthonormal U.
Matrix als_half_col(const QuadraticProblem& p, const Matrix& U);

/// One ALS sweep: row half-step, QR, column half-step, QR.
/// Returns (U, S, V) = (Q_U, R_V^T, Q_V) so that U S V^T = S2(S1(X)).
LowRankState als_sweep(const QuadraticProblem& p, const LowRankState& state);

/// Raw factor pair X = U V^T, no orthonormality assumed.
struct FactorPair {
  Matrix U;
  Matrix V;
};

/// One sweep without QR stabilization: U := argmin f(U V^T), then
/// V := argmin f(U V^T) for that raw U. Represents the same iterate as
/// als_sweep started from the same row space.
FactorPair als_sweep_unstabilized(const QuadraticProblem& p, const FactorPair& factors);

struct StopCriteria {
  std::size_t max_sweeps = 500;
  double grad_tol = 1e-10;
  double stagnation_tol = 0.0;  // 0 disables the stagnation test
};

enum class StopReason { GradientTolerance, MaxSweeps, Stagnation };
std::string_view stop_reason_name(StopReason reason);

struct TraceRecord {
  std::size_t sweep = 0;
  double objective = 0.0;
  std::optional<double> error;  // ||X_l - Xref||_F when a reference is given
  double projected_gradient = 0.0;  // ||P(X_l)[grad f(X_l)]||_F
  double min_singular_value = 0.0;  // sigma_min of the middle factor S
};

struct IterationTrace {
  std::vector<TraceRecord> records;
  StopReason reason = StopReason::MaxSweeps;
};

struct AlsResult {
  LowRankState state;
  IterationTrace trace;
};

using SweepObserver = std::function<void(std::size_t sweep, const LowRankState& state)>;

/// Iterates als_sweep until the projected gradient falls below
/// grad_tol * ||P(X0)[grad f(X0)]||, the sweep budget is spent, or two
/// consecutive iterates are within stagnation_tol. The trace has one row for
/// X0 plus one per sweep.
AlsResult als_run(const QuadraticProblem& p, const LowRankState& x0, const StopCriteria& stop,
                  const Matrix* reference = nullptr, const SweepObserver& observer = {});

/// X0 = Q1 I_k Q2^T with Q-factors of Gaussian matrices drawn from Rng(seed, 3).
LowRankState random_start(Index rows, Index cols, Index k, std::uint64_t seed);

/// Simultaneous orthogonal iteration (two-sided block power method). Returns
/// the iterates l = 1..sweeps as (U_l, S_l, V_l).
std::vector<LowRankState> orthogonal_iteration(const Matrix& B, Index k, const Matrix& V0,
                                               std::size_t sweeps);

/// ALS for A = A2 (x) A1 computed through the block power method on
/// C = A1^{-1/2} B A2^{-1/2}, started from Y0 = A1^{1/2} X0 A2^{1/2}.
/// Returns X_l = A1^{-1/2} Y_l A2^{-1/2} for l = 1..sweeps.
std::vector<Matrix> kronecker_reduced_run(const Matrix& A1, const Matrix& A2, const Matrix& B,
                                          Index k, const LowRankState& x0, std::size_t sweeps);

}  // namespace lrals
