#pragma once

#include "lrals/linalg.hpp"

#include <cstdint>
#include <string_view>

namespace lrals {

/// Symmetric positive definite linear operator on R^{m x n} (the Hessian of
/// the quadratic objective). Immutable after construction.
///
/// Kinds and their action on X:
///   Identity           X
///   Kronecker(A1, A2)  A1 X A2^T        matrix (A2 (x) A1) under column-major vec
///   Laplace2D(n)       D X + X D        D = (n+1)^2 tridiag(-1, 2, -1)
///   DenseSPD(M)        unvec(M vec(X))
class HessianOperator {
 public:
  enum class Kind { Identity, Kronecker, Laplace2D, DenseSPD };

  static HessianOperator identity(Index rows, Index cols);
  /// A1 is rows x rows, A2 is cols x cols. Only squareness is checked here.
  static HessianOperator kronecker(Matrix a1, Matrix a2);
  static HessianOperator laplace2d(Index n);
  /// M is (rows*cols) x (rows*cols) and must be symmetric.
  static HessianOperator dense_spd(Matrix m, Index rows, Index cols);

  Kind kind() const { return kind_; }
  std::string_view kind_name() const;
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  /// A1 for Kronecker, D_n for Laplace2D.
  const Matrix& left_factor() const { return left_; }
  /// A2 for Kronecker, D_n for Laplace2D.
  const Matrix& right_factor() const { return right_; }
  /// M for DenseSPD.
  const Matrix& dense_matrix() const { return dense_; }

  Matrix apply(const Matrix& X) const;

  /// Matrix of the operator in the basis of unit matrices E_ij, column-major
  /// vec. Throws CapacityError when rows*cols exceeds kMaxAssembledDim.
  Matrix assemble() const;

 private:
  HessianOperator(Kind kind, Index rows, Index cols) : kind_(kind), rows_(rows), cols_(cols) {}

  Kind kind_;
  Index rows_;
  Index cols_;
  Matrix left_;
  Matrix right_;
  Matrix dense_;
};

/// D_n = (n+1)^2 tridiag(-1, 2, -1), the 1D Dirichlet Laplacian.
Matrix laplace_1d(Index n);

/// R^T R with R a dim x dim standard-normal matrix drawn from Rng(seed, 1),
/// symmetrized by averaging with its transpose.
Matrix make_random_spd(Index dim, std::uint64_t seed);

/// Dense Kronecker product lhs (x) rhs.
Matrix kronecker_product(const Matrix& lhs, const Matrix& rhs);

}  // namespace lrals
