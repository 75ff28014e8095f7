#include "lrals/geometry.hpp"

#include "lrals/errors.hpp"

#include <algorithm>
#include <sstream>
#include <string>

namespace lrals {

namespace {

struct SlimSvd {
  Matrix U;
  Vector s;
  Matrix V;
};

SlimSvd slim_svd(const Matrix& X, double rel_tol) {
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Index r = 0;
  if (s.size() > 0 && s(0) > 0.0) {
    const double cut = rel_tol * s(0);
    while (r < s.size() && s(r) > cut) ++r;
  }
  return {svd.matrixU().leftCols(r), s.head(r), svd.matrixV().leftCols(r)};
}

Matrix dominant_basis(const Matrix& X, Index k, bool left) {
  if (k < 1 || k > std::min(X.rows(), X.cols())) {
    throw DimensionError("extended projector: rank out of range");
  }
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return left ? Matrix(svd.matrixU().leftCols(k)) : Matrix(svd.matrixV().leftCols(k));
}

}  // namespace

void LowRankState::validate(double orth_tol) const {
  const Index k = S.rows();
  if (S.cols() != k || U.cols() != k || V.cols() != k || k < 1) {
    throw DimensionError("low-rank state: inconsistent factor shapes");
  }
  if (k > U.rows() || k > V.rows()) throw DimensionError("low-rank state: rank exceeds dimensions");
  const Matrix I = Matrix::Identity(k, k);
  if ((U.transpose() * U - I).norm() > orth_tol || (V.transpose() * V - I).norm() > orth_tol) {
    throw PreconditionError("low-rank state: factors are not orthonormal");
  }
}

void LowRankState::require_full_rank(double rel_tol) const {
  const double ratio = relative_min_singular_value(S);
  if (!(ratio > rel_tol)) {
    std::ostringstream msg;
    msg << "low-rank state: rank dropped below " << rank() << " (sigma_min/sigma_max = " << ratio
        << ")";
    throw RankDropError(msg.str());
  }
}

LowRankState truncated_svd(const Matrix& B, Index k) {
  if (k < 1 || k > std::min(B.rows(), B.cols())) {
    throw DimensionError("truncated_svd: rank out of range");
  }
  Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU().leftCols(k), svd.singularValues().head(k).asDiagonal(),
          svd.matrixV().leftCols(k)};
}

Matrix pinv(const Matrix& X, double rel_tol) {
  const SlimSvd svd = slim_svd(X, rel_tol);
  if (svd.s.size() == 0) return Matrix::Zero(X.cols(), X.rows());
  return svd.V * svd.s.cwiseInverse().asDiagonal() * svd.U.transpose();
}

ProjectorBundle::ProjectorBundle(const Matrix& X, double rel_tol) : base_(X) {
  SlimSvd svd = slim_svd(X, rel_tol);
  if (svd.s.size() == 0) throw RankDropError("projector bundle: base point is zero");
  pinv_ = svd.V * svd.s.cwiseInverse().asDiagonal() * svd.U.transpose();
  U_ = std::move(svd.U);
  V_ = std::move(svd.V);
}

ProjectorBundle::ProjectorBundle(const LowRankState& state) : base_(state.dense()) {
  state.validate();
  state.require_full_rank();
  // Re-orthonormalize through the SVD of the small core so that U_, V_ span
  // exactly the column/row spaces used by X^+.
  Eigen::JacobiSVD<Matrix> core(state.S, Eigen::ComputeFullU | Eigen::ComputeFullV);
  U_ = state.U * core.matrixU();
  V_ = state.V * core.matrixV();
  pinv_ = V_ * core.singularValues().cwiseInverse().asDiagonal() * U_.transpose();
}

void ProjectorBundle::check_shape(const Matrix& Z, const char* what) const {
  if (Z.rows() != base_.rows() || Z.cols() != base_.cols()) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(base_.rows()) + "x" +
                         std::to_string(base_.cols()) + " argument, got " +
                         std::to_string(Z.rows()) + "x" + std::to_string(Z.cols()));
  }
}

Matrix ProjectorBundle::project_row(const Matrix& Z) const {
  check_shape(Z, "project_row");
  return (Z * V_) * V_.transpose();
}

Matrix ProjectorBundle::project_col(const Matrix& Z) const {
  check_shape(Z, "project_col");
  return U_ * (U_.transpose() * Z);
}

Matrix ProjectorBundle::project_tangent(const Matrix& Z) const {
  check_shape(Z, "project_tangent");
  const Matrix ZV = Z * V_;
  const Matrix UtZ = U_.transpose() * Z;
  return ZV * V_.transpose() + U_ * UtZ - U_ * ((UtZ * V_) * V_.transpose());
}

Matrix ProjectorBundle::project(Side side, const Matrix& Z) const {
  return side == Side::Row ? project_row(Z) : project_col(Z);
}

Matrix ProjectorBundle::d_row(const Matrix& H, const Matrix& Z) const {
  check_shape(H, "dP1");
  check_shape(Z, "dP1");
  // Z X^+ H - Z X^+ H X^+ X + Z (I - X^+ X) H^T (X^+)^T
  const Matrix ZXpH = (Z * pinv_) * H;
  const Matrix Zperp = Z - (Z * V_) * V_.transpose();
  return ZXpH - (ZXpH * V_) * V_.transpose() + (Zperp * H.transpose()) * pinv_.transpose();
}

Matrix ProjectorBundle::d_col(const Matrix& H, const Matrix& Z) const {
  check_shape(H, "dP2");
  check_shape(Z, "dP2");
  // H X^+ Z - X X^+ H X^+ Z + (X^+)^T H^T (I - X X^+) Z
  const Matrix HXpZ = H * (pinv_ * Z);
  const Matrix Zperp = Z - U_ * (U_.transpose() * Z);
  return HXpZ - U_ * (U_.transpose() * HXpZ) + pinv_.transpose() * (H.transpose() * Zperp);
}

Matrix ProjectorBundle::curvature(Side side, const Matrix& G, const Matrix& H) const {
  check_shape(G, "curvature_N");
  const Matrix Ht = project_tangent(H);
  if (side == Side::Row) return (G * Ht.transpose()) * pinv_.transpose();
  return pinv_.transpose() * (Ht.transpose() * G);
}

double ProjectorBundle::critical_residual(const Matrix& G) const {
  return project_tangent(G).norm();
}

Matrix project_row(const Matrix& X, const Matrix& Z) { return ProjectorBundle(X).project_row(Z); }
Matrix project_col(const Matrix& X, const Matrix& Z) { return ProjectorBundle(X).project_col(Z); }
Matrix project_tangent(const Matrix& X, const Matrix& Z) {
  return ProjectorBundle(X).project_tangent(Z);
}

Matrix dP1(const Matrix& X, const Matrix& H, const Matrix& Z) {
  return ProjectorBundle(X).d_row(H, Z);
}

Matrix dP2(const Matrix& X, const Matrix& H, const Matrix& Z) {
  return ProjectorBundle(X).d_col(H, Z);
}

Matrix extended_project_row(const Matrix& X, Index k, const Matrix& Z) {
  const Matrix V = dominant_basis(X, k, false);
  return (Z * V) * V.transpose();
}

Matrix extended_project_col(const Matrix& X, Index k, const Matrix& Z) {
  const Matrix U = dominant_basis(X, k, true);
  return U * (U.transpose() * Z);
}

Matrix curvature_N(const Matrix& Xbar, const Matrix& G, const Matrix& H, Side side,
                   const CriticalPointCheck& check) {
  const ProjectorBundle bundle(Xbar);
  if (check.enabled) {
    const double residual = bundle.critical_residual(G);
    const double bound = check.tol * std::max(G.norm(), check.scale);
    if (residual > bound) {
      std::ostringstream msg;
      msg << "curvature_N: base point is not critical, ||P(X)[grad f]|| = " << residual
          << " exceeds " << bound;
      throw PreconditionError(msg.str());
    }
  }
  return bundle.curvature(side, G, H);
}

}  // namespace lrals
