#pragma once

// Tangent-space geometry of the rank-k matrix variety.
//
// For X of rank k with slim SVD X = U S V^T:
//   P1(X)[Z] = Z X^+ X = Z V V^T      (row space fixed,   T1(X))
//   P2(X)[Z] = X X^+ Z = U U^T Z      (column space fixed, T2(X))
//   P(X)     = P1 + P2 - P1 P2        (tangent space T(X) = T1 + T2)
// All three are Frobenius-orthogonal projectors, and P1, P2 commute.

#include "lrals/linalg.hpp"

namespace lrals {

/// Rank-k matrix X = U S V^T with orthonormal U (m x k), V (n x k) and a
/// k x k middle factor S that need not be diagonal.
struct LowRankState {
  Matrix U;
  Matrix S;
  Matrix V;

  Index rows() const { return U.rows(); }
  Index cols() const { return V.rows(); }
  Index rank() const { return S.rows(); }
  Matrix dense() const { return U * S * V.transpose(); }

  /// Checks shapes and orthonormality of U, V (to `orth_tol`). Throws
  /// DimensionError or PreconditionError.
  void validate(double orth_tol = 1e-10) const;

  /// Throws RankDropError if sigma_min(S) <= rel_tol * sigma_max(S).
  void require_full_rank(double rel_tol = 1e-12) const;
};

/// Best rank-k approximation of B (singular values in S, descending).
LowRankState truncated_svd(const Matrix& B, Index k);

/// Moore-Penrose pseudoinverse; singular values <= rel_tol * sigma_max count
/// as zero.
Matrix pinv(const Matrix& X, double rel_tol = 1e-12);

enum class Side { Row = 1, Col = 2 };

/// Critical-point precondition used by curvature_N: passes when
/// ||P(X)[G]|| <= tol * max(||G||, scale). `scale` lets callers whose gradient
/// vanishes (zero-gradient fixed points) measure against the problem size.
struct CriticalPointCheck {
  bool enabled = true;
  double tol = 1e-8;
  double scale = 0.0;
};

/// Projectors and their derivatives at a fixed base point. Caches X^+, U, V
/// at construction; never mutated afterwards.
class ProjectorBundle {
 public:
  /// Rank is taken from the pseudoinverse tolerance.
  explicit ProjectorBundle(const Matrix& X, double rel_tol = 1e-12);
  explicit ProjectorBundle(const LowRankState& state);

  const Matrix& base() const { return base_; }
  const Matrix& pseudo_inverse() const { return pinv_; }
  const Matrix& col_basis() const { return U_; }
  const Matrix& row_basis() const { return V_; }
  Index rank() const { return U_.cols(); }

  Matrix project_row(const Matrix& Z) const;
  Matrix project_col(const Matrix& Z) const;
  Matrix project_tangent(const Matrix& Z) const;
  Matrix project(Side side, const Matrix& Z) const;

  /// P1'(X; H)[Z] and P2'(X; H)[Z]. Exact for H in T(X), zero on T(X)^perp.
  Matrix d_row(const Matrix& H, const Matrix& Z) const;
  Matrix d_col(const Matrix& H, const Matrix& Z) const;

  /// N1[H] = G H^T (X^+)^T,  N2[H] = (X^+)^T H^T G, after projecting H onto T(X).
  /// No critical-point check.
  Matrix curvature(Side side, const Matrix& G, const Matrix& H) const;

  /// Residual ||P(X)[G]|| of the critical-point condition.
  double critical_residual(const Matrix& G) const;

 private:
  void check_shape(const Matrix& Z, const char* what) const;

  Matrix base_;
  Matrix pinv_;
  Matrix U_;
  Matrix V_;
};

Matrix project_row(const Matrix& X, const Matrix& Z);
Matrix project_col(const Matrix& X, const Matrix& Z);
Matrix project_tangent(const Matrix& X, const Matrix& Z);

Matrix dP1(const Matrix& X, const Matrix& H, const Matrix& Z);
Matrix dP2(const Matrix& X, const Matrix& H, const Matrix& Z);

/// Smooth extension of P1/P2 to matrices whose k-th singular value exceeds the
/// (k+1)-th: projectors onto the dominant k right/left singular subspaces.
Matrix extended_project_row(const Matrix& X, Index k, const Matrix& Z);
Matrix extended_project_col(const Matrix& X, Index k, const Matrix& Z);

/// Curvature operator at a critical point Xbar with gradient G. H is projected
/// onto T(Xbar) first. Throws PreconditionError naming the residual when the
/// check is enabled and fails.
Matrix curvature_N(const Matrix& Xbar, const Matrix& G, const Matrix& H, Side side,
                   const CriticalPointCheck& check = {});

}  // namespace lrals
