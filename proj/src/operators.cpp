#include "lrals/operators.hpp"

#include "lrals/errors.hpp"

#include <string>
#include <utility>

namespace lrals {

namespace {

constexpr std::uint64_t kSpdStream = 1;

std::string shape(Index r, Index c) { return std::to_string(r) + "x" + std::to_string(c); }

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw PreconditionError(std::string(what) + ": non-finite entries");
}

}  // namespace

HessianOperator HessianOperator::identity(Index rows, Index cols) {
  if (rows < 1 || cols < 1) throw DimensionError("identity operator: empty domain");
  return HessianOperator(Kind::Identity, rows, cols);
}

HessianOperator HessianOperator::kronecker(Matrix a1, Matrix a2) {
  if (a1.rows() != a1.cols() || a2.rows() != a2.cols() || a1.rows() == 0 || a2.rows() == 0) {
    throw DimensionError("kronecker operator: factors must be square, got " +
                         shape(a1.rows(), a1.cols()) + " and " + shape(a2.rows(), a2.cols()));
  }
  require_finite(a1, "kronecker operator");
  require_finite(a2, "kronecker operator");
  HessianOperator op(Kind::Kronecker, a1.rows(), a2.rows());
  op.left_ = std::move(a1);
  op.right_ = std::move(a2);
  return op;
}

HessianOperator HessianOperator::laplace2d(Index n) {
  if (n < 1) throw DimensionError("laplace2d operator: grid size must be positive");
  HessianOperator op(Kind::Laplace2D, n, n);
  op.left_ = laplace_1d(n);
  op.right_ = op.left_;
  return op;
}

HessianOperator HessianOperator::dense_spd(Matrix m, Index rows, Index cols) {
  if (rows < 1 || cols < 1 || m.rows() != rows * cols || m.cols() != rows * cols) {
    throw DimensionError("dense operator: expected " + shape(rows * cols, rows * cols) +
                         " matrix, got " + shape(m.rows(), m.cols()));
  }
  require_finite(m, "dense operator");
  if ((m - m.transpose()).norm() > 1e-12 * m.norm()) {
    throw PreconditionError("dense operator: matrix is not symmetric");
  }
  HessianOperator op(Kind::DenseSPD, rows, cols);
  op.dense_ = std::move(m);
  return op;
}

std::string_view HessianOperator::kind_name() const {
  switch (kind_) {
    case Kind::Identity: return "identity";
    case Kind::Kronecker: return "kronecker";
    case Kind::Laplace2D: return "laplace2d";
    case Kind::DenseSPD: return "dense_spd";
  }
  return "unknown";
}

Matrix HessianOperator::apply(const Matrix& X) const {
  if (X.rows() != rows_ || X.cols() != cols_) {
    throw DimensionError("apply: operator acts on " + shape(rows_, cols_) + " matrices, got " +
                         shape(X.rows(), X.cols()));
  }
  switch (kind_) {
    case Kind::Identity: return X;
    case Kind::Kronecker: return left_ * X * right_.transpose();
    case Kind::Laplace2D: return left_ * X + X * right_;
    case Kind::DenseSPD: return unvec(dense_ * vec(X), rows_, cols_);
  }
  return X;
}

Matrix HessianOperator::assemble() const {
  const Index dim = rows_ * cols_;
  if (dim > kMaxAssembledDim) {
    throw CapacityError("assemble: dimension " + std::to_string(dim) + " exceeds cap " +
                        std::to_string(kMaxAssembledDim));
  }
  switch (kind_) {
    case Kind::Identity: return Matrix::Identity(dim, dim);
    case Kind::Kronecker: return kronecker_product(right_, left_);
    case Kind::Laplace2D:
      return kronecker_product(Matrix::Identity(cols_, cols_), left_) +
             kronecker_product(right_, Matrix::Identity(rows_, rows_));
    case Kind::DenseSPD: return dense_;
  }
  return {};
}

Matrix laplace_1d(Index n) {
  const double scale = static_cast<double>((n + 1) * (n + 1));
  Matrix D = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    D(i, i) = 2.0 * scale;
    if (i + 1 < n) {
      D(i, i + 1) = -scale;
      D(i + 1, i) = -scale;
    }
  }
  return D;
}

Matrix make_random_spd(Index dim, std::uint64_t seed) {
  if (dim < 1) throw DimensionError("make_random_spd: dim must be positive");
  Rng rng(seed, kSpdStream);
  const Matrix R = rng.gaussian(dim, dim);
  const Matrix M = R.transpose() * R;
  return 0.5 * (M + M.transpose());
}

Matrix kronecker_product(const Matrix& lhs, const Matrix& rhs) {
  Matrix out(lhs.rows() * rhs.rows(), lhs.cols() * rhs.cols());
  for (Index j = 0; j < lhs.cols(); ++j)
    for (Index i = 0; i < lhs.rows(); ++i)
      out.block(i * rhs.rows(), j * rhs.cols(), rhs.rows(), rhs.cols()) = lhs(i, j) * rhs;
  return out;
}

}  // namespace lrals
