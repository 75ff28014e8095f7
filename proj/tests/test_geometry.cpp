#include "lrals/errors.hpp"
#include "lrals/geometry.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <string>

using namespace lrals;

namespace {

Matrix rank_k(std::mt19937_64& gen, Index m, Index n, Index k) {
  return oracle::gaussian(gen, m, k) * oracle::gaussian(gen, k, n);
}

// (I - X X^+) E (I - X^+ X): a direction in T(X)^perp.
Matrix normal_direction(const Matrix& X, Index k, const Matrix& E) {
  const oracle::Subspaces s = oracle::dominant(X, k);
  const Matrix QU = Matrix::Identity(X.rows(), X.rows()) - s.U * s.U.transpose();
  const Matrix QV = Matrix::Identity(X.cols(), X.cols()) - s.V * s.V.transpose();
  return QU * E * QV;
}

}  // namespace

TEST_CASE("pinv") {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 2.0;
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 0.5;
  CHECK((pinv(D) - expected).norm() <= 1e-15);
  CHECK((pinv(Matrix::Identity(4, 4)) - Matrix::Identity(4, 4)).norm() <= 1e-14);

  std::mt19937_64 gen(5);
  const Matrix X = oracle::gaussian(gen, 5, 3);
  const Matrix Xp = pinv(X);
  CHECK(oracle::rel(X * Xp * X, X) <= 1e-10);
  CHECK(oracle::rel(Xp * X * Xp, Xp) <= 1e-10);
  CHECK(((X * Xp) - (X * Xp).transpose()).norm() <= 1e-10);
  CHECK(((Xp * X) - (Xp * X).transpose()).norm() <= 1e-10);

  const Matrix Z = pinv(Matrix::Zero(3, 2));
  CHECK(Z.rows() == 2);
  CHECK(Z.cols() == 3);
  CHECK(Z.norm() == 0.0);
}

TEST_CASE("projection examples") {
  Matrix X = Matrix::Zero(2, 2);
  X(0, 0) = 1.0;
  Matrix Z(2, 2);
  Z << 1, 2, 3, 4;
  Matrix kept(2, 2);
  kept << 1, 0, 3, 0;
  CHECK((project_row(X, Z) - kept).norm() <= 1e-15);

  std::mt19937_64 gen(7);
  for (int t = 0; t < 5; ++t) {
    const Matrix Y = rank_k(gen, 6, 5, 2);
    CHECK(oracle::rel(project_tangent(Y, Y), Y) <= 1e-12);
    const Matrix N = normal_direction(Y, 2, oracle::gaussian(gen, 6, 5));
    CHECK(project_row(Y, N).norm() <= 1e-12 * N.norm());
    CHECK(project_col(Y, N).norm() <= 1e-12 * N.norm());
    CHECK(project_tangent(Y, N).norm() <= 1e-12 * N.norm());
    // against the oracle projectors
    const Matrix W = oracle::gaussian(gen, 6, 5);
    CHECK((project_row(Y, W) - oracle::P1(Y, 2, W)).norm() <= 1e-12 * W.norm());
    CHECK((project_col(Y, W) - oracle::P2(Y, 2, W)).norm() <= 1e-12 * W.norm());
    CHECK((project_tangent(Y, W) - oracle::P(Y, 2, W)).norm() <= 1e-12 * W.norm());
  }
}

TEST_CASE("projector properties") {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const ProjectorBundle b(rank_k(gen, 7, 5, 3));
    const Matrix Y = oracle::gaussian(gen, 7, 5);
    const Matrix Z = oracle::gaussian(gen, 7, 5);
    for (Side side : {Side::Row, Side::Col}) {
      CHECK((b.project(side, b.project(side, Y)) - b.project(side, Y)).norm() <= 1e-12 * Y.norm());
      CHECK(std::abs(frobenius_inner(b.project(side, Y), Z) - frobenius_inner(Y, b.project(side, Z))) <=
            1e-12 * Y.norm() * Z.norm());
    }
    CHECK((b.project_row(b.project_col(Y)) - b.project_col(b.project_row(Y))).norm() <= 1e-12 * Y.norm());
    CHECK((b.project_tangent(b.project_tangent(Y)) - b.project_tangent(Y)).norm() <= 1e-12 * Y.norm());
    CHECK(std::abs(frobenius_inner(b.project_tangent(Y), Z) - frobenius_inner(Y, b.project_tangent(Z))) <=
          1e-12 * Y.norm() * Z.norm());
  }
}

TEST_CASE("tangent dimension k(m+n-k)") {
  std::mt19937_64 gen(13);
  for (auto [m, n, k] : {std::tuple<Index, Index, Index>{5, 4, 2}, {6, 6, 3}, {3, 7, 1}}) {
    const ProjectorBundle b(rank_k(gen, m, n, k));
    const Matrix P = oracle::matrix_of([&](const Matrix& Z) { return b.project_tangent(Z); }, m, n);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (P + P.transpose()));
    Index ones = 0;
    for (Index i = 0; i < eig.eigenvalues().size(); ++i) {
      const double e = eig.eigenvalues()(i);
      CHECK((std::abs(e) <= 1e-12 || std::abs(e - 1.0) <= 1e-12));
      if (e > 0.5) ++ones;
    }
    CHECK(ones == k * (m + n - k));
  }
}

TEST_CASE("projector derivatives") {
  std::mt19937_64 gen(17);
  const double h = 1e-5;
  SUBCASE("zero on the normal space") {
    for (int t = 0; t < 5; ++t) {
      const Matrix X = rank_k(gen, 6, 5, 2);
      const Matrix H = normal_direction(X, 2, oracle::gaussian(gen, 6, 5));
      const Matrix Z = oracle::gaussian(gen, 6, 5);
      CHECK(dP1(X, H, Z).norm() <= 1e-12 * H.norm() * Z.norm());
      CHECK(dP2(X, H, Z).norm() <= 1e-12 * H.norm() * Z.norm());
    }
  }
  SUBCASE("central differences of the extended projectors") {
    for (int t = 0; t < 20; ++t) {
      const Index k = 1 + t % 3;
      const Matrix X = rank_k(gen, 6, 5, k);
      const Matrix H = oracle::P(X, k, oracle::gaussian(gen, 6, 5));
      const Matrix Z = oracle::gaussian(gen, 6, 5);
      const Matrix fd1 = oracle::central_diff([&](const Matrix& Y) { return oracle::P1(Y, k, Z); }, X, H, h);
      const Matrix fd2 = oracle::central_diff([&](const Matrix& Y) { return oracle::P2(Y, k, Z); }, X, H, h);
      CHECK(oracle::rel(dP1(X, H, Z), fd1) <= 1e-6);
      CHECK(oracle::rel(dP2(X, H, Z), fd2) <= 1e-6);
    }
  }
  SUBCASE("extended projectors agree with the oracle") {
    const Matrix X = oracle::gaussian(gen, 6, 5);
    const Matrix Z = oracle::gaussian(gen, 6, 5);
    CHECK((extended_project_row(X, 2, Z) - oracle::P1(X, 2, Z)).norm() <= 1e-12 * Z.norm());
    CHECK((extended_project_col(X, 2, Z) - oracle::P2(X, 2, Z)).norm() <= 1e-12 * Z.norm());
  }
  SUBCASE("simplified form for Z in the normal space") {
    for (int t = 0; t < 5; ++t) {
      const Matrix X = rank_k(gen, 6, 5, 2);
      const Matrix H = oracle::P(X, 2, oracle::gaussian(gen, 6, 5));
      const Matrix Z = normal_direction(X, 2, oracle::gaussian(gen, 6, 5));
      const Matrix Xp = oracle::dominant(X, 2).V *
                        oracle::dominant(X, 2).s.head(2).cwiseInverse().asDiagonal() *
                        oracle::dominant(X, 2).U.transpose();
      const Matrix simple = Z * H.transpose() * Xp.transpose();
      CHECK((dP1(X, H, Z) - simple).norm() <= 1e-12 * simple.norm());
    }
  }
}

TEST_CASE("curvature operators") {
  std::mt19937_64 gen(19);
  const Matrix B = oracle::with_singular_values(gen, 6, 5, (Vector(5) << 3, 2, 1, 0.5, 0.1).finished());
  const Matrix Xbar = oracle::truncated(B, 2);
  const Matrix G = Xbar - B;  // gradient of 1/2 ||X - B||^2
  const ProjectorBundle b(Xbar);

  SUBCASE("zero gradient") {
    const Matrix H = oracle::gaussian(gen, 6, 5);
    CHECK(curvature_N(Xbar, Matrix::Zero(6, 5), H, Side::Row).norm() == 0.0);
    CHECK(curvature_N(Xbar, Matrix::Zero(6, 5), H, Side::Col).norm() == 0.0);
  }
  SUBCASE("N_i vanishes on T_i") {
    for (int t = 0; t < 5; ++t) {
      const Matrix H1 = oracle::P1(Xbar, 2, oracle::gaussian(gen, 6, 5));
      const Matrix H2 = oracle::P2(Xbar, 2, oracle::gaussian(gen, 6, 5));
      CHECK(curvature_N(Xbar, G, H1, Side::Row).norm() <= 1e-12 * G.norm() * H1.norm());
      CHECK(curvature_N(Xbar, G, H2, Side::Col).norm() <= 1e-12 * G.norm() * H2.norm());
    }
  }
  SUBCASE("consistency with the projector derivatives at a critical point") {
    for (int t = 0; t < 5; ++t) {
      const Matrix H = oracle::P(Xbar, 2, oracle::gaussian(gen, 6, 5));
      const Matrix n1 = curvature_N(Xbar, G, H, Side::Row);
      const Matrix n2 = curvature_N(Xbar, G, H, Side::Col);
      CHECK((n1 - dP1(Xbar, H, G)).norm() <= 1e-12 * n1.norm());
      CHECK((n2 - dP2(Xbar, H, G)).norm() <= 1e-12 * n2.norm());
      // explicit formulas
      const Matrix Xp = pinv(Xbar);
      CHECK((n1 - G * H.transpose() * Xp.transpose()).norm() <= 1e-12 * n1.norm());
      CHECK((n2 - Xp.transpose() * H.transpose() * G).norm() <= 1e-12 * n2.norm());
    }
  }
  SUBCASE("ambient directions are projected first") {
    const Matrix H = oracle::gaussian(gen, 6, 5);
    CHECK((curvature_N(Xbar, G, H, Side::Row) - curvature_N(Xbar, G, oracle::P(Xbar, 2, H), Side::Row)).norm() <=
          1e-13 * G.norm() * H.norm());
  }
  SUBCASE("critical-point check") {
    const Matrix notCritical = Xbar + 0.1 * oracle::P(Xbar, 2, oracle::gaussian(gen, 6, 5));
    const Matrix H = oracle::gaussian(gen, 6, 5);
    try {
      curvature_N(notCritical, notCritical - B, H, Side::Row);
      FAIL("expected PreconditionError");
    } catch (const PreconditionError& e) {
      CHECK(std::string(e.what()).find("||P(X)[grad f]||") != std::string::npos);
    }
    CriticalPointCheck off;
    off.enabled = false;
    CHECK_NOTHROW(curvature_N(notCritical, notCritical - B, H, Side::Row, off));
  }
}

TEST_CASE("low-rank state checks") {
  std::mt19937_64 gen(23);
  const LowRankState s = truncated_svd(oracle::gaussian(gen, 5, 4), 2);
  CHECK_NOTHROW(s.validate());
  CHECK_NOTHROW(s.require_full_rank());
  LowRankState bad = s;
  bad.U *= 2.0;
  CHECK_THROWS_AS(bad.validate(), PreconditionError);
  LowRankState dropped = s;
  dropped.S(1, 1) = 0.0;
  CHECK_THROWS_AS(dropped.require_full_rank(), RankDropError);
  LowRankState shape = s;
  shape.V = Matrix::Zero(4, 3);
  CHECK_THROWS_AS(shape.validate(), DimensionError);
  CHECK(oracle::rel(s.dense(), oracle::truncated(s.dense(), 2)) <= 1e-14);
}
