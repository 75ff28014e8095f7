#include "lrals/solvers.hpp"

#include "lrals/errors.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <utility>

namespace lrals {

namespace {

constexpr double kRankDropTol = 1e-12;
constexpr std::uint64_t kStartStream = 3;

void require_shape(const Matrix& X, Index rows, Index cols, const char* what) {
  if (X.rows() != rows || X.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(X.rows()) + "x" +
                         std::to_string(X.cols()));
  }
}

void require_factor_rank(const Matrix& F, const char* what) {
  const double ratio = relative_min_singular_value(F);
  if (!(ratio > kRankDropTol)) {
    std::ostringstream msg;
    msg << what << ": factor lost rank (sigma_min/sigma_max = " << ratio << ")";
    throw RankDropError(msg.str());
  }
}

Eigen::LLT<Matrix> factor_restricted(Matrix system, const char* what) {
  system = 0.5 * (system + system.transpose());
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) {
    throw SolverError(std::string(what) +
                      ": restricted system is not positive definite (rank loss)");
  }
  return llt;
}

}  // namespace

QuadraticProblem::QuadraticProblem(HessianOperator op, Matrix rhs, Index rank)
    : op_(std::move(op)), rhs_(std::move(rhs)), rank_(rank) {
  require_shape(rhs_, op_.rows(), op_.cols(), "quadratic problem right-hand side");
  if (!rhs_.allFinite()) throw PreconditionError("quadratic problem: non-finite right-hand side");
  if (rank_ < 1 || rank_ > std::min(op_.rows(), op_.cols())) {
    throw DimensionError("quadratic problem: rank must lie in [1, min(m, n)]");
  }
}

double QuadraticProblem::objective(const Matrix& X) const {
  require_shape(X, rows(), cols(), "objective");
  return 0.5 * frobenius_inner(X, op_.apply(X)) - frobenius_inner(X, rhs_);
}

Matrix QuadraticProblem::gradient(const Matrix& X) const {
  require_shape(X, rows(), cols(), "gradient");
  return op_.apply(X) - rhs_;
}

Matrix QuadraticProblem::unconstrained_solution() const {
  switch (op_.kind()) {
    case HessianOperator::Kind::Identity: return rhs_;
    case HessianOperator::Kind::Kronecker: {
      // A1 X A2^T = B  <=>  A2 X^T = (A1^{-1} B)^T
      const Matrix Y = op_.left_factor().llt().solve(rhs_);
      return op_.right_factor().llt().solve(Matrix(Y.transpose())).transpose();
    }
    default: break;
  }
  const Eigen::LLT<Matrix> llt(op_.assemble());
  if (llt.info() != Eigen::Success) throw SolverError("unconstrained solve: operator not SPD");
  return unvec(llt.solve(vec(rhs_)), rows(), cols());
}

RowSubspaceSystem::RowSubspaceSystem(const HessianOperator& op, const Matrix& V)
    : rows_(op.rows()), V_(V) {
  require_shape(V, op.cols(), V.cols(), "row subspace system");
  const Index m = op.rows();
  const Index k = V.cols();
  Matrix system(m * k, m * k);
  Matrix E = Matrix::Zero(m, op.cols());
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < m; ++i) {
      E.row(i) = V.col(j).transpose();
      const Matrix AV = op.apply(E) * V;
      system.col(j * m + i) = vec(AV);
      E.row(i).setZero();
    }
  }
  llt_ = factor_restricted(std::move(system), "row half-step");
}

Matrix RowSubspaceSystem::solve(const Matrix& rhs) const {
  require_shape(rhs, rows_, V_.cols(), "row subspace solve");
  return unvec(llt_.solve(vec(rhs)), rows_, V_.cols());
}

ColSubspaceSystem::ColSubspaceSystem(const HessianOperator& op, const Matrix& U)
    : cols_(op.cols()), U_(U) {
  require_shape(U, op.rows(), U.cols(), "column subspace system");
  const Index n = op.cols();
  const Index k = U.cols();
  Matrix system(k * n, k * n);
  Matrix E = Matrix::Zero(op.rows(), n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < k; ++i) {
      E.col(j) = U.col(i);
      const Matrix UtA = U.transpose() * op.apply(E);
      system.col(j * k + i) = vec(UtA);
      E.col(j).setZero();
    }
  }
  llt_ = factor_restricted(std::move(system), "column half-step");
}

Matrix ColSubspaceSystem::solve(const Matrix& rhs) const {
  require_shape(rhs, U_.cols(), cols_, "column subspace solve");
  return unvec(llt_.solve(vec(rhs)), U_.cols(), cols_);
}

Matrix als_half_row(const QuadraticProblem& p, const Matrix& V) {
  require_shape(V, p.cols(), p.rank(), "als_half_row");
  const RowSubspaceSystem system(p.op(), V);
  return system.solve(p.rhs() * V);
}

Matrix als_half_col(const QuadraticProblem& p, const Matrix& U) {
  require_shape(U, p.rows(), p.rank(), "als_half_col");
  const ColSubspaceSystem system(p.op(), U);
  return system.solve(U.transpose() * p.rhs()).transpose();
}

LowRankState als_sweep(const QuadraticProblem& p, const LowRankState& state) {
  state.require_full_rank();
  const Matrix U = als_half_row(p, state.V);
  require_factor_rank(U, "als_sweep (row half-step)");
  const QRFactors qu = thin_qr(U);
  const Matrix V = als_half_col(p, qu.Q);
  require_factor_rank(V, "als_sweep (column half-step)");
  QRFactors qv = thin_qr(V);
  return {qu.Q, qv.R.transpose(), std::move(qv.Q)};
}

FactorPair als_sweep_unstabilized(const QuadraticProblem& p, const FactorPair& factors) {
  require_shape(factors.V, p.cols(), p.rank(), "als_sweep_unstabilized");
  const RowSubspaceSystem rows(p.op(), factors.V);
  Matrix U = rows.solve(p.rhs() * factors.V);
  require_factor_rank(U, "als_sweep_unstabilized (row half-step)");
  const ColSubspaceSystem cols(p.op(), U);
  Matrix V = cols.solve(U.transpose() * p.rhs()).transpose();
  require_factor_rank(V, "als_sweep_unstabilized (column half-step)");
  return {std::move(U), std::move(V)};
}

std::string_view stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::MaxSweeps: return "max_sweeps";
    case StopReason::Stagnation: return "stagnation";
  }
  return "unknown";
}

namespace {

TraceRecord make_record(const QuadraticProblem& p, std::size_t sweep, const LowRankState& state,
                        const Matrix& X, const Matrix* reference) {
  TraceRecord rec;
  rec.sweep = sweep;
  rec.objective = p.objective(X);
  if (reference != nullptr) rec.error = (X - *reference).norm();
  rec.projected_gradient = ProjectorBundle(state).project_tangent(p.gradient(X)).norm();
  const Vector s = singular_values(state.S);
  rec.min_singular_value = s.size() > 0 ? s(s.size() - 1) : 0.0;
  return rec;
}

}  // namespace

AlsResult als_run(const QuadraticProblem& p, const LowRankState& x0, const StopCriteria& stop,
                  const Matrix* reference, const SweepObserver& observer) {
  x0.validate();
  x0.require_full_rank();
  if (x0.rows() != p.rows() || x0.cols() != p.cols() || x0.rank() != p.rank()) {
    throw DimensionError("als_run: starting point does not match the problem shape/rank");
  }
  if (reference != nullptr) require_shape(*reference, p.rows(), p.cols(), "als_run reference");

  AlsResult result{x0, {}};
  Matrix X = x0.dense();
  result.trace.records.push_back(make_record(p, 0, x0, X, reference));
  if (observer) observer(0, x0);
  const double initial = result.trace.records.front().projected_gradient;
  result.trace.reason = StopReason::MaxSweeps;

  for (std::size_t sweep = 1; sweep <= stop.max_sweeps; ++sweep) {
    LowRankState next = als_sweep(p, result.state);
    Matrix Xnext = next.dense();
    const double step = (Xnext - X).norm();
    result.trace.records.push_back(make_record(p, sweep, next, Xnext, reference));
    if (observer) observer(sweep, next);
    result.state = std::move(next);
    X = std::move(Xnext);

    if (result.trace.records.back().projected_gradient <= stop.grad_tol * initial) {
      result.trace.reason = StopReason::GradientTolerance;
      break;
    }
    if (stop.stagnation_tol > 0.0 && step <= stop.stagnation_tol) {
      result.trace.reason = StopReason::Stagnation;
      break;
    }
  }
  return result;
}

LowRankState random_start(Index rows, Index cols, Index k, std::uint64_t seed) {
  if (k < 1 || k > std::min(rows, cols)) throw DimensionError("random_start: rank out of range");
  Rng rng(seed, kStartStream);
  Matrix U = rng.orthonormal(rows, k);
  Matrix V = rng.orthonormal(cols, k);
  return {std::move(U), Matrix::Identity(k, k), std::move(V)};
}

std::vector<LowRankState> orthogonal_iteration(const Matrix& B, Index k, const Matrix& V0,
                                               std::size_t sweeps) {
  require_shape(V0, B.cols(), k, "orthogonal_iteration start");
  if ((V0.transpose() * V0 - Matrix::Identity(k, k)).norm() > 1e-10) {
    throw PreconditionError("orthogonal_iteration: V0 is not orthonormal");
  }
  std::vector<LowRankState> iterates;
  iterates.reserve(sweeps);
  Matrix V = V0;
  for (std::size_t l = 0; l < sweeps; ++l) {
    const Matrix BV = B * V;
    require_factor_rank(BV, "orthogonal_iteration (B V)");
    Matrix U = thin_qr(BV).Q;
    const Matrix BtU = B.transpose() * U;
    require_factor_rank(BtU, "orthogonal_iteration (B^T U)");
    QRFactors qr = thin_qr(BtU);
    V = qr.Q;
    iterates.push_back({std::move(U), qr.R.transpose(), std::move(qr.Q)});
  }
  return iterates;
}

std::vector<Matrix> kronecker_reduced_run(const Matrix& A1, const Matrix& A2, const Matrix& B,
                                          Index k, const LowRankState& x0, std::size_t sweeps) {
  require_spd(A1, "kronecker_reduced_run (A1)");
  require_spd(A2, "kronecker_reduced_run (A2)");
  require_shape(B, A1.rows(), A2.rows(), "kronecker_reduced_run right-hand side");
  x0.validate();
  const Matrix A1_ih = spd_inv_sqrt(A1);
  const Matrix A2_ih = spd_inv_sqrt(A2);
  const Matrix C = A1_ih * B * A2_ih;
  // Row space of Y0 = A1^{1/2} X0 A2^{1/2} is the span of A2^{1/2} V0.
  const Matrix V0 = thin_qr(spd_sqrt(A2) * x0.V).Q;
  std::vector<Matrix> out;
  out.reserve(sweeps);
  for (const LowRankState& y : orthogonal_iteration(C, k, V0, sweeps)) {
    out.push_back(A1_ih * y.dense() * A2_ih);
  }
  return out;
}

}  // namespace lrals
