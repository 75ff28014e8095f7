#include "lrals/linalg.hpp"

#include "lrals/errors.hpp"

#include <cmath>
#include <string>

namespace lrals {

Vector vec(const Matrix& X) {
  return Eigen::Map<const Vector>(X.data(), X.size());
}

Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) {
    throw DimensionError("unvec: vector of length " + std::to_string(v.size()) +
                         " cannot be reshaped to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

double frobenius_inner(const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
    throw DimensionError("frobenius_inner: shape mismatch");
  }
  return X.cwiseProduct(Y).sum();
}

bool all_finite(const Matrix& X) { return X.allFinite(); }

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

Matrix Rng::gaussian(Index rows, Index cols) {
  Matrix G(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) G(i, j) = normal_(engine_);
  return G;
}

Matrix Rng::orthonormal(Index rows, Index cols) { return thin_qr(gaussian(rows, cols)).Q; }

QRFactors thin_qr(const Matrix& A) {
  const Index m = A.rows();
  const Index k = A.cols();
  if (k > m) throw DimensionError("thin_qr: more columns than rows");
  Eigen::HouseholderQR<Matrix> qr(A);
  QRFactors out;
  out.Q = qr.householderQ() * Matrix::Identity(m, k);
  out.R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index i = 0; i < k; ++i) {
    if (out.R(i, i) < 0.0) {
      out.R.row(i) *= -1.0;
      out.Q.col(i) *= -1.0;
    }
  }
  return out;
}

Vector singular_values(const Matrix& A) {
  if (A.size() == 0) return Vector();
  return Eigen::JacobiSVD<Matrix>(A).singularValues();
}

double relative_min_singular_value(const Matrix& A) {
  const Vector s = singular_values(A);
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  return s(s.size() - 1) / s(0);
}

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> spd_eigen(const Matrix& A, const char* what) {
  require_spd(A, what);
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (A + A.transpose()));
}

}  // namespace

Matrix spd_sqrt(const Matrix& A) {
  auto es = spd_eigen(A, "spd_sqrt");
  const Matrix& Q = es.eigenvectors();
  return Q * es.eigenvalues().cwiseSqrt().asDiagonal() * Q.transpose();
}

Matrix spd_inv_sqrt(const Matrix& A) {
  auto es = spd_eigen(A, "spd_inv_sqrt");
  const Matrix& Q = es.eigenvectors();
  return Q * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose();
}

void require_spd(const Matrix& A, const char* what, double rel_tol) {
  if (A.rows() != A.cols() || A.rows() == 0) {
    throw PreconditionError(std::string(what) + ": matrix is not square");
  }
  if (!A.allFinite()) throw PreconditionError(std::string(what) + ": non-finite entries");
  const double scale = A.norm();
  if ((A - A.transpose()).norm() > rel_tol * scale) {
    throw PreconditionError(std::string(what) + ": matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || es.eigenvalues()(0) <= 0.0) {
    throw PreconditionError(std::string(what) + ": matrix is not positive definite");
  }
}

double relative_error(const Matrix& A, const Matrix& B) {
  const double denom = B.norm();
  const double diff = (A - B).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace lrals
