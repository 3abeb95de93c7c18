#include "descramble/fresnel.hpp"
#include "descramble/stencils.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace descramble;

TEST_CASE("Fourier differentiation matrix") {
  const Matrix d4 = fourier_diff_matrix(4);
  CHECK(d4(1, 0) == doctest::Approx(-0.5));
  for (Index m : {4, 8, 16}) {
    const Matrix d = fourier_diff_matrix(m);
    CHECK(d.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((d + d.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
  const Index m = 8;
  Vector x(m), s(m), c(m);
  for (Index i = 0; i < m; ++i) {
    x(i) = 2 * std::numbers::pi * double(i) / double(m);
    s(i) = std::sin(x(i));
    c(i) = std::cos(x(i));
  }
  CHECK((fourier_diff_matrix(m) * s - c).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(fourier_diff_matrix(5), InvalidArgument);
  CHECK_THROWS_AS(fourier_diff_matrix(2), InvalidArgument);
}

TEST_CASE("finite difference stencils") {
  StencilSpec one{StencilKind::kFiniteDifference, 3, 1, FdBoundary::kOneSided};
  Matrix expect(2, 3);
  expect << -1, 1, 0, 0, -1, 1;
  CHECK((finite_diff_matrix(one) - expect).norm() == 0.0);

  StencilSpec per{StencilKind::kFiniteDifference, 4, 1, FdBoundary::kPeriodic};
  Vector v(4), out(4);
  v << 0, 1, 0, -1;
  out << 1, -1, -1, 1;
  CHECK((finite_diff_matrix(per) * v - out).norm() == 0.0);

  for (int order : {1, 2})
    for (FdBoundary b : {FdBoundary::kOneSided, FdBoundary::kPeriodic}) {
      const Matrix d = finite_diff_matrix({StencilKind::kFiniteDifference, 7, order, b});
      CHECK((d * Vector::Ones(7)).cwiseAbs().maxCoeff() == 0.0);
    }
  const Matrix d2 = finite_diff_matrix({StencilKind::kFiniteDifference, 5, 2, FdBoundary::kOneSided});
  CHECK(d2.rows() == 3);
  CHECK(d2(0, 0) == 1);
  CHECK(d2(0, 1) == -2);
  CHECK_THROWS_AS(finite_diff_matrix({StencilKind::kFiniteDifference, 5, 3, FdBoundary::kOneSided}), InvalidArgument);
  CHECK(parse_stencil_kind("fd") == StencilKind::kFiniteDifference);
  CHECK(parse_fd_boundary(to_string(FdBoundary::kOneSided)) == FdBoundary::kOneSided);
}

TEST_CASE("trigonometric basis") {
  const Matrix t = trig_basis(4);
  CHECK((t.transpose() * t - Matrix::Identity(4, 4)).norm() < 1e-14);
  CHECK((t.col(0).array() - 0.5).abs().maxCoeff() < 1e-15);
  Vector sin1(4);
  sin1 << 0, 1, 0, -1;
  CHECK((t.col(1) - sin1 / std::sqrt(2.0)).norm() < 1e-15);
  for (Index m : {5, 8, 12}) {
    const Matrix b = trig_basis(m);
    CHECK((b.col(0).array() - 1 / std::sqrt(double(m))).abs().maxCoeff() < 1e-14);
    CHECK((b.transpose() * b - Matrix::Identity(m, m)).norm() < 1e-12);
  }
}

TEST_CASE("smooth basis of a stencil") {
  const Matrix d = fourier_diff_matrix(8);
  const SymEig e = smooth_basis_of(d);
  CHECK(e.values(0) == doctest::Approx(0).epsilon(1e-12));
  CHECK((e.vectors.col(0).cwiseAbs().array() - 1 / std::sqrt(8.0)).abs().maxCoeff() < 1e-12);
  const Vector oracle_values = oracle::jacobi_eigenvalues(d.transpose() * d);
  CHECK((e.values - oracle_values).cwiseAbs().maxCoeff() < 1e-10);
  // cos/sin pairs share an eigenvalue; the Nyquist mode is annihilated, so it ties with the constant.
  int pairs = 0;
  for (Index i = 0; i + 1 < 8; ++i)
    if (std::abs(e.values(i + 1) - e.values(i)) < 1e-9) ++pairs;
  CHECK(pairs == 4);
  CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(8, 8)).norm() < 1e-12);
  CHECK((e.vectors.transpose() * d.transpose() * d * e.vectors - Matrix(e.values.asDiagonal())).norm() < 1e-10);

  const SymEig id = smooth_basis_of(Matrix::Identity(3, 3));
  CHECK((id.values.array() - 1).abs().maxCoeff() < 1e-14);
  CHECK((id.vectors - Matrix::Identity(3, 3)).norm() == 0.0);

  CHECK(match_trig_basis(d, trig_basis(8)) <= 1e-8);
  CHECK(match_trig_basis(Matrix::Identity(4, 4), trig_basis(4)) < 1e-14);
  Rng rng = substream(12, 0);
  CHECK(match_trig_basis(gaussian_matrix(4, 4, rng), trig_basis(4)) > 1e-3);
}

TEST_CASE("Fresnel integrals") {
  CHECK(fresnel_c(0) == 0.0);
  CHECK(fresnel_s(0) == 0.0);
  CHECK(std::abs(fresnel_c(1) - 0.9045242379) < 1e-9);
  CHECK(std::abs(fresnel_s(1) - 0.3102683017) < 1e-9);
  for (double x : {0.01, 0.3, 1.0, 1.7, 2.4, 2.9})
    CHECK(std::abs(fresnel_c(x) - oracle::fresnel_c_series(x)) < 1e-10);
  for (double x : {0.3, 1.7, 3.5, 6.0, 9.0}) {
    CHECK(std::abs(fresnel_c(x) - oracle::fresnel_c(x)) < 1e-8);
    CHECK(std::abs(fresnel_s(x) - oracle::fresnel_s(x)) < 1e-8);
  }
  CHECK(fresnel_c(-1.3) == doctest::Approx(-fresnel_c(1.3)));
  CHECK(std::abs(fresnel_c(50) - std::sqrt(std::numbers::pi / 8)) < 1e-2);
  CHECK(std::abs(fresnel_s(50) - std::sqrt(std::numbers::pi / 8)) < 1e-2);
  const FresnelPair p = fresnel(2.2);
  CHECK(p.c == fresnel_c(2.2));
  CHECK(p.s == fresnel_s(2.2));
}
