#pragma once

// Dense helpers shared by every module: vectorization, random matrices,
// deterministic QR, symmetric matrix functions and truncated SVD.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace lrals {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Largest mn for which an mn x mn matrix is ever assembled.
inline constexpr Index kMaxAssembledDim = 10'000;

/// Column-major vec: stacks the columns of X. Fixed project-wide.
Vector vec(const Matrix& X);
Matrix unvec(const Vector& v, Index rows, Index cols);

double frobenius_inner(const Matrix& X, const Matrix& Y);

/// True iff every entry is finite.
bool all_finite(const Matrix& X);

/// Seeded generator. `stream` separates independent draws made from one
/// experiment seed (operator, right-hand side, starting guess, ...).
/// Engine: std::mt19937_64 seeded through std::seed_seq{seed, stream};
/// normals from std::normal_distribution<double>(0, 1), filled column-major.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  Matrix gaussian(Index rows, Index cols);

  /// Q factor (positive-diagonal convention) of a Gaussian rows x cols matrix.
  Matrix orthonormal(Index rows, Index cols);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct QRFactors {
  Matrix Q;  // rows x k, orthonormal columns
  Matrix R;  // k x k upper triangular with non-negative diagonal
};

/// Thin Householder QR with the sign convention diag(R) >= 0, so that factor
/// sequences are reproducible.
QRFactors thin_qr(const Matrix& A);

/// Singular values, descending.
Vector singular_values(const Matrix& A);

/// Smallest-to-largest singular value ratio of a tall factor.
double relative_min_singular_value(const Matrix& A);

/// Symmetric square root and inverse square root of an SPD matrix via its
/// eigendecomposition. Throws PreconditionError when A is not SPD.
Matrix spd_sqrt(const Matrix& A);
Matrix spd_inv_sqrt(const Matrix& A);

/// Throws PreconditionError unless A is square, symmetric to `rel_tol`
/// (relative Frobenius) and has a positive smallest eigenvalue.
void require_spd(const Matrix& A, const char* what, double rel_tol = 1e-10);

/// Relative Frobenius distance ||A - B|| / ||B||, falling back to the absolute
/// distance when B = 0.
double relative_error(const Matrix& A, const Matrix& B);

}  // namespace lrals
