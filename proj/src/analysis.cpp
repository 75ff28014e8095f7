#include "lrals/analysis.hpp"

#include "lrals/errors.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace lrals {

namespace {

CriticalPointCheck with_default_scale(CriticalPointCheck check, const QuadraticProblem& p) {
  if (check.scale == 0.0) check.scale = p.rhs().norm();
  return check;
}

ProjectorBundle checked_bundle(const QuadraticProblem& p, const Matrix& Xbar,
                               const CriticalPointCheck& check) {
  if (Xbar.rows() != p.rows() || Xbar.cols() != p.cols()) {
    throw DimensionError("linearized map: fixed point has the wrong shape");
  }
  ProjectorBundle bundle(Xbar);
  if (bundle.rank() != p.rank()) {
    throw RankDropError("linearized map: fixed point has rank " + std::to_string(bundle.rank()) +
                        ", expected " + std::to_string(p.rank()));
  }
  if (check.enabled) {
    const Matrix G = p.gradient(Xbar);
    const double residual = bundle.critical_residual(G);
    const double bound = check.tol * std::max(G.norm(), check.scale);
    if (residual > bound) {
      std::ostringstream msg;
      msg << "linearized map: base point is not critical, ||P(X)[grad f]|| = " << residual
          << " exceeds " << bound;
      throw PreconditionError(msg.str());
    }
  }
  return bundle;
}

}  // namespace

LinearizedAlsMap::LinearizedAlsMap(const QuadraticProblem& p, const Matrix& Xbar,
                                   CriticalPointCheck check)
    : problem_(&p),
      bundle_(checked_bundle(p, Xbar, with_default_scale(check, p))),
      gradient_(p.gradient(Xbar)),
      row_system_(p.op(), bundle_.row_basis()),
      col_system_(p.op(), bundle_.col_basis()) {}

Matrix LinearizedAlsMap::restricted_inverse(Side side, const Matrix& G) const {
  if (side == Side::Row) {
    const Matrix& V = bundle_.row_basis();
    return row_system_.solve(G * V) * V.transpose();
  }
  const Matrix& U = bundle_.col_basis();
  return U * col_system_.solve(U.transpose() * G);
}

Matrix LinearizedAlsMap::a_projection(Side side, const Matrix& H) const {
  return restricted_inverse(side, problem_->op().apply(H));
}

Matrix LinearizedAlsMap::curvature(Side side, const Matrix& H) const {
  return bundle_.curvature(side, gradient_, H);
}

Matrix LinearizedAlsMap::apply_step(Side side, const Matrix& H) const {
  return H - a_projection(side, H) - restricted_inverse(side, curvature(side, H));
}

Matrix LinearizedAlsMap::apply(const Matrix& H) const {
  return apply_step(Side::Col, apply_step(Side::Row, H));
}

Matrix LinearizedAlsMap::curvature_product(const Matrix& H) const {
  const Matrix first = restricted_inverse(Side::Row, curvature(Side::Row, bundle_.project_tangent(H)));
  return restricted_inverse(Side::Col, curvature(Side::Col, first));
}

Matrix apply_S_prime(const QuadraticProblem& p, const Matrix& Xbar, const Matrix& H) {
  return LinearizedAlsMap(p, Xbar).apply(H);
}

Matrix assemble_linear_map(Index rows, Index cols, const LinearMap& map, unsigned threads) {
  const Index dim = rows * cols;
  if (dim > kMaxAssembledDim) {
    throw CapacityError("assemble: dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(kMaxAssembledDim));
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, dim));
  Matrix out(dim, dim);
  auto work = [&](Index begin, Index end) {
    Matrix E = Matrix::Zero(rows, cols);
    for (Index j = begin; j < end; ++j) {
      E(j % rows, j / rows) = 1.0;
      const Matrix image = map(E);
      E(j % rows, j / rows) = 0.0;
      if (image.rows() != rows || image.cols() != cols) {
        throw DimensionError("assemble: map changed the matrix shape");
      }
      out.col(j) = vec(image);
    }
  };
  if (threads <= 1) {
    work(0, dim);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const Index chunk = (dim + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const Index begin = std::min<Index>(dim, t * chunk);
    const Index end = std::min<Index>(dim, begin + chunk);
    pool.emplace_back([&, t, begin, end] {
      try {
        work(begin, end);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Matrix assemble_S_prime(const QuadraticProblem& p, const Matrix& Xbar) {
  const LinearizedAlsMap map(p, Xbar);
  return assemble_linear_map(p.rows(), p.cols(), [&](const Matrix& H) { return map.apply(H); });
}

Matrix assemble_S_prime_tangent(const QuadraticProblem& p, const Matrix& Xbar) {
  const LinearizedAlsMap map(p, Xbar);
  return assemble_linear_map(p.rows(), p.cols(), [&](const Matrix& H) {
    return map.apply(map.projectors().project_tangent(H));
  });
}

double spectral_radius(const Matrix& M) {
  if (M.rows() != M.cols()) throw DimensionError("spectral_radius: matrix is not square");
  const lapack_int n = static_cast<lapack_int>(M.rows());
  if (n == 0) return 0.0;
  if (!M.allFinite()) throw SolverError("spectral_radius: non-finite entries");
  Matrix work = M;
  std::vector<double> wr(n), wi(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n, wr.data(),
                                        wi.data(), nullptr, 1, nullptr, 1);
  if (info != 0) {
    throw SolverError("spectral_radius: dgeev failed with info = " + std::to_string(info));
  }
  double rho = 0.0;
  for (lapack_int i = 0; i < n; ++i) rho = std::max(rho, std::hypot(wr[i], wi[i]));
  return rho;
}

double rho_assembled(const QuadraticProblem& p, const Matrix& Xbar) {
  return spectral_radius(assemble_S_prime_tangent(p, Xbar));
}

double rho_via_curvature_product(const QuadraticProblem& p, const Matrix& Xbar) {
  const auto kind = p.op().kind();
  if (kind != HessianOperator::Kind::Identity && kind != HessianOperator::Kind::Kronecker) {
    throw PreconditionError(std::string("rho_via_curvature_product: unsupported operator kind '") +
                            std::string(p.op().kind_name()) + "'");
  }
  const LinearizedAlsMap map(p, Xbar);
  return spectral_radius(assemble_linear_map(
      p.rows(), p.cols(), [&](const Matrix& H) { return map.curvature_product(H); }));
}

Vector rate_spectrum(const QuadraticProblem& p) {
  switch (p.op().kind()) {
    case HessianOperator::Kind::Identity: return singular_values(p.rhs());
    case HessianOperator::Kind::Kronecker: {
      const Matrix C =
          spd_inv_sqrt(p.op().left_factor()) * p.rhs() * spd_inv_sqrt(p.op().right_factor());
      return singular_values(C);
    }
    default: return Vector();
  }
}

std::optional<double> theoretical_rate(const QuadraticProblem& p) {
  const Vector s = rate_spectrum(p);
  if (s.size() == 0) return std::nullopt;
  const Index k = p.rank();
  const double sk = s(k - 1);
  const double sk1 = k < s.size() ? s(k) : 0.0;
  // Numerically zero; C carries rounding of order cond(A1) cond(A2) eps.
  if (sk1 <= 1e-12 * s(0)) return 0.0;
  if (sk - sk1 <= 1e-12 * sk) {
    std::ostringstream msg;
    msg << "theoretical_rate: singular values s_k = " << sk << " and s_{k+1} = " << sk1
        << " are not separated";
    throw PreconditionError(msg.str());
  }
  const double ratio = sk1 / sk;
  return ratio * ratio;
}

Matrix reference_solution(const QuadraticProblem& p, const LowRankState& start,
                          std::size_t max_sweeps) {
  switch (p.op().kind()) {
    case HessianOperator::Kind::Identity: return truncated_svd(p.rhs(), p.rank()).dense();
    case HessianOperator::Kind::Kronecker: {
      const Matrix& A1 = p.op().left_factor();
      const Matrix& A2 = p.op().right_factor();
      const Matrix A1_ih = spd_inv_sqrt(A1);
      const Matrix A2_ih = spd_inv_sqrt(A2);
      const Matrix C = A1_ih * p.rhs() * A2_ih;
      const LowRankState Ybar = truncated_svd(C, p.rank());
      const Matrix Xbar = A1_ih * Ybar.dense() * A2_ih;
      // The closed form carries the conditioning of A1, A2; polish it into the
      // floating-point ALS limit so that iterate errors reach the rounding
      // floor. Enough sweeps to contract by e^-40 at the predicted rate.
      const Vector s = singular_values(C);
      const Index k = p.rank();
      const double ratio = k < s.size() ? s(k) / s(k - 1) : 0.0;
      const double rate = std::min(ratio * ratio, 0.999);
      std::size_t sweeps = 5;
      if (rate > 0.0) sweeps += static_cast<std::size_t>(std::ceil(40.0 / -std::log(rate)));
      StopCriteria polish;
      polish.max_sweeps = std::min(max_sweeps, sweeps);
      polish.grad_tol = 0.0;
      return als_run(p, truncated_svd(Xbar, k), polish).state.dense();
    }
    default: break;
  }
  StopCriteria stop;
  stop.max_sweeps = max_sweeps;
  stop.grad_tol = 1e-12;
  const AlsResult coarse = als_run(p, start, stop);
  // Polish for as many sweeps again: the linear rate that took the projected
  // gradient down to 1e-12 takes the remaining error to the rounding floor, so
  // the reference carries no residual along the slowest mode.
  StopCriteria polish;
  polish.max_sweeps = std::min(max_sweeps, coarse.trace.records.size() - 1);
  polish.grad_tol = 0.0;
  return als_run(p, coarse.state, polish).state.dense();
}

SlopeFit observed_slope(const std::vector<double>& errors, double reference_norm,
                        std::optional<std::pair<std::size_t, std::size_t>> window,
                        std::size_t auto_window) {
  const double floor = 100.0 * std::numeric_limits<double>::epsilon() * reference_norm;
  std::vector<std::size_t> usable;
  if (window) {
    const auto [first, last] = *window;
    for (std::size_t l = first; l <= last && l < errors.size(); ++l)
      if (errors[l] > floor && std::isfinite(errors[l])) usable.push_back(l);
  } else {
    // Ill-conditioned problems saturate well above the rounding floor, so the
    // cutoff is also kept 10x above the smallest error the run reached. The
    // window is the strictly decreasing stretch that ends at the last sweep
    // before the cutoff. It starts at sweep 2 at the earliest: X_1 still
    // carries the fast components of the random start.
    constexpr std::size_t kFirst = 2;
    double smallest = std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l < errors.size(); ++l)
      if (std::isfinite(errors[l])) smallest = std::min(smallest, errors[l]);
    const double cutoff = std::max(floor, 10.0 * smallest);
    std::size_t end = 1;
    while (end < errors.size() && std::isfinite(errors[end]) && errors[end] > cutoff) ++end;
    if (end > kFirst) {
      std::size_t begin = end - 1;
      while (begin > kFirst && errors[begin - 1] > errors[begin]) --begin;
      for (std::size_t l = begin; l < end; ++l) usable.push_back(l);
    }
    if (usable.size() > auto_window) {
      usable.erase(usable.begin(), usable.end() - static_cast<std::ptrdiff_t>(auto_window));
    }
  }
  if (usable.size() < 4) {
    throw PreconditionError("observed_slope: only " + std::to_string(usable.size()) +
                            " usable sweeps above the saturation floor (need 4)");
  }
  double mean_x = 0.0, mean_y = 0.0;
  for (std::size_t l : usable) {
    mean_x += static_cast<double>(l);
    mean_y += std::log(errors[l]);
  }
  mean_x /= static_cast<double>(usable.size());
  mean_y /= static_cast<double>(usable.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t l : usable) {
    const double dx = static_cast<double>(l) - mean_x;
    sxy += dx * (std::log(errors[l]) - mean_y);
    sxx += dx * dx;
  }
  return {std::exp(sxy / sxx), usable.front(), usable.back()};
}

SlopeFit observed_slope(const IterationTrace& trace, double reference_norm,
                        std::optional<std::pair<std::size_t, std::size_t>> window,
                        std::size_t auto_window) {
  std::vector<double> errors;
  errors.reserve(trace.records.size());
  for (const TraceRecord& rec : trace.records) {
    if (!rec.error) throw PreconditionError("observed_slope: trace has no reference errors");
    errors.push_back(*rec.error);
  }
  return observed_slope(errors, reference_norm, window, auto_window);
}

}  // namespace lrals
