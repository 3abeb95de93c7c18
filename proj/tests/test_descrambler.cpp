#include "descramble/descrambler.hpp"
#include "descramble/stencils.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

using namespace descramble;
namespace fs = std::filesystem;

namespace {

Matrix first_difference(Index m) {
  return finite_diff_matrix({StencilKind::kFiniteDifference, m, 1, FdBoundary::kOneSided});
}

Matrix admissible_data(Index m, Index n, std::uint64_t seed) {
  Rng rng = substream(seed, 0);
  for (;;) {
    Matrix a = gaussian_matrix(m, m, rng) * gaussian_matrix(m, n, rng);
    if (is_admissible(a)) return a;
  }
}

}  // namespace

TEST_CASE("smoothness objective") {
  Rng rng = substream(1, 0);
  const Matrix a = gaussian_matrix(4, 10, rng);
  const Matrix i4 = Matrix::Identity(4, 4);
  CHECK(eta_smoothness(i4, i4, a) == doctest::Approx(a.squaredNorm() / 10));
  CHECK(eta_smoothness(fourier_diff_matrix(4), random_orthogonal(4, rng), Matrix::Zero(4, 3)) == 0.0);
  CHECK(eta_smoothness(first_difference(4), i4, Matrix::Ones(4, 6) * 2.5) == 0.0);
  CHECK_THROWS_AS(eta_smoothness(i4, i4, Matrix::Ones(3, 2)), InvalidArgument);
}

TEST_CASE("closed form on a 2x2 problem matches brute force over O(2)") {
  Matrix d(2, 2);
  d << -1, 1, 0, 0;
  const double eps = 1e-3;
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = 1;
  a(1, 1) = eps;
  const DescrambleReport rep = descramble_closed(d, a);
  CHECK(rep.objective < 1e-5);
  CHECK(std::abs(std::abs(rep.p(0, 0)) - 1 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(std::abs(rep.p(1, 0)) - 1 / std::sqrt(2.0)) < 1e-12);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : oracle::o2_grid(20000)) best = std::min(best, eta_smoothness(d, q, a));
  CHECK(rep.objective <= best + 1e-12);
  CHECK(best - rep.objective < 1e-6);
}

TEST_CASE("closed form is optimal against random probes and the manifold solver") {
  const Matrix d = fourier_diff_matrix(8);
  const Matrix a = admissible_data(8, 200, 3);
  const DescrambleReport closed = descramble_closed(d, a);
  CHECK(orthogonality_defect(closed.p) < 1e-12);
  Rng rng = substream(3, 9);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) worst = std::min(worst, eta_smoothness(d, random_orthogonal(8, rng), a));
  CHECK(closed.objective <= worst);

  ManifoldOptions opt;
  opt.seed = 5;
  const DescrambleReport man = descramble_manifold(d, a, opt);
  CHECK(orthogonality_defect(man.p) < 1e-10);
  CHECK(std::abs(man.objective - closed.objective) / closed.objective <= 1e-6);
}

TEST_CASE("manifold solver: invariance and agreement on many instances") {
  Rng rng = substream(4, 0);
  const Matrix a = gaussian_matrix(5, 30, rng);
  const DescrambleReport inv = descramble_manifold(Matrix::Identity(5, 5), a);
  CHECK(inv.objective == doctest::Approx(a.squaredNorm() / 30).epsilon(1e-12));

  const Matrix d = first_difference(6);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix x = admissible_data(6, 40, 100 + s);
    const double c = descramble_closed(d, x).objective;
    ManifoldOptions opt;
    opt.seed = s;
    const double m = descramble_manifold(d, x, opt).objective;
    CHECK(std::abs(m - c) / std::max(c, 1e-300) <= 1e-6);
  }

  Matrix d2(2, 2);
  d2 << 1, -1, 0.3, 0.2;
  const Matrix a2 = admissible_data(2, 12, 44);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : oracle::o2_grid(20000)) best = std::min(best, eta_smoothness(d2, q, a2));
  const double m2 = descramble_manifold(d2, a2).objective;
  CHECK(m2 <= best + 1e-12);
  CHECK(best - m2 <= 1e-5 * best);
}

TEST_CASE("fixed point: data already in smooth order") {
  const Matrix d = fourier_diff_matrix(8);
  const Matrix t = smooth_basis_of(d).vectors;
  Rng rng = substream(6, 0);
  Vector s(4);
  s << 4, 3, 2, 1;
  const Matrix v = random_orthogonal(20, rng).leftCols(4);
  const Matrix a = t.leftCols(4) * s.asDiagonal() * v.transpose();
  const DescrambleReport rep = descramble_closed(d, a);
  CHECK((rep.p * a - a).norm() / a.norm() < 1e-10);
  CHECK(rep.objective == doctest::Approx(eta_smoothness(d, Matrix::Identity(8, 8), a)).epsilon(1e-10));
}

TEST_CASE("network layer descrambling") {
  const Matrix d = fourier_diff_matrix(8);
  Rng rng = substream(7, 0);
  const Matrix x = gaussian_matrix(6, 300, rng);
  const FeedForwardNet lin = init_net({{6, 8, 8}, {Activation::kIdentity, Activation::kIdentity}, false}, 3);
  const DescrambleReport direct = descramble_closed(d, lin.layers[0].weight * x);
  const DescrambleReport layer = descramble_layer(lin, 1, x, d, Method::kClosedForm);
  CHECK((direct.p - layer.p).norm() < 1e-12);

  // Linearization of a linear net is exact.
  const DescrambleReport jac = descramble_jacobian(lin, 2, x, d);
  CHECK((jac.p - descramble_layer(lin, 2, x, d, Method::kClosedForm).p).norm() < 1e-8);
  CHECK(jac.method == Method::kJacobian);

  const FeedForwardNet tanh = init_net({{6, 8, 8}, {Activation::kTanh, Activation::kSigmoid}, true}, 4);
  const DescrambleReport c2 = descramble_layer(tanh, 2, x, d, Method::kClosedForm);
  ManifoldOptions opt;
  opt.seed = 2;
  const DescrambleReport m2 = descramble_layer(tanh, 2, x, d, Method::kManifold, opt);
  CHECK(std::abs(m2.objective - c2.objective) / c2.objective <= 1e-6);
  CHECK(orthogonality_defect(c2.p) < 1e-12);
  CHECK_THROWS_AS(descramble_layer(tanh, 3, x, d, Method::kClosedForm), InvalidArgument);

  // Constant batch: the linearized tap has rank one.
  const Matrix constant = x.col(0).replicate(1, 10);
  CHECK(descramble_jacobian(tanh, 2, constant, d).rank_used == 1);

  // The linearization error vanishes as inputs shrink.
  const FeedForwardNet wide = init_net({{6, 8, 8}, {Activation::kTanh, Activation::kTanh}, false}, 5);
  double prev = std::numeric_limits<double>::infinity();
  for (double scale : {1.0, 0.1, 0.01}) {
    const double full = descramble_layer(wide, 2, x * scale, d, Method::kClosedForm).objective;
    const double lin_obj = descramble_jacobian(wide, 2, x * scale, d).objective;
    const double gap = std::abs(full - lin_obj) / full;
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("maximum diagonal sum descrambler") {
  Matrix w(2, 2);
  w << 2, 0, 0, 1;
  DescrambleReport r = mds_descrambler(w);
  CHECK((r.p - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((r.p * w).trace() == doctest::Approx(3));
  r = mds_descrambler(-Matrix::Identity(2, 2));
  CHECK((r.p + Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((r.p * -Matrix::Identity(2, 2)).trace() == doctest::Approx(2));

  Rng rng = substream(8, 0);
  const Matrix g = gaussian_matrix(2, 2, rng);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& q : oracle::o2_grid(100000)) best = std::max(best, (q * g).trace());
  const double nuclear = singular_values(g).sum();
  CHECK(std::abs(best - nuclear) <= 1e-6 * nuclear);
  CHECK((mds_descrambler(g).p * g).trace() == doctest::Approx(nuclear).epsilon(1e-12));
  CHECK_THROWS_AS(mds_descrambler(Matrix::Ones(2, 3)), InvalidArgument);
}

TEST_CASE("large-sample limits") {
  const Matrix d = fourier_diff_matrix(8);
  Rng rng = substream(9, 0);
  const Matrix w = gaussian_matrix(8, 8, rng);
  const TheoryLimit lim = theory_limit_noise(w, d);
  CHECK(orthogonality_defect(lim.p_completed) < 1e-12);
  CHECK((lim.p_limit * w - lim.descrambled_w).norm() < 1e-10);

  // Rank one: the single direction goes to the smoothest mode.
  const Vector u = gaussian_matrix(8, 1, rng).col(0).normalized();
  const Matrix r1 = u * gaussian_matrix(1, 5, rng);
  const TheoryLimit l1 = theory_limit_noise(r1, d);
  CHECK(std::abs((l1.p_completed * u).dot(smooth_basis_of(d).vectors.col(0))) == doctest::Approx(1.0));

  // Commuting perturbation and zero signal leave U unchanged.
  const Matrix wd = (Vector(4) << 4, 3, 2, 1).finished().asDiagonal();
  const Matrix e = (Vector(4) << 1, 0.5, 0.2, 0.1).finished().asDiagonal();
  const Matrix d4 = fourier_diff_matrix(4);
  const TheoryLimit c = theory_limit_sigma(wd, d4, e, 3.0);
  CHECK(c.dist_op < 1e-12);
  REQUIRE(c.bound.has_value());
  CHECK(c.dist_op <= *c.bound);
  CHECK(theory_limit_sigma(wd, d4, Matrix::Zero(4, 4), 2.0).dist_fro < 1e-12);

  // sigma^-2 decay for a non-commuting signal.
  const Matrix g = gaussian_matrix(6, 6, rng);
  const Matrix es = gaussian_matrix(6, 6, rng);
  const Matrix ess = es * es.transpose() / 6.0;
  const double d1 = theory_limit_sigma(g, fourier_diff_matrix(6), ess, 100).dist_op;
  const double d2 = theory_limit_sigma(g, fourier_diff_matrix(6), ess, 1000).dist_op;
  CHECK(std::log10(d2 / d1) == doctest::Approx(-2.0).epsilon(0.05));
  CHECK_THROWS_AS(theory_limit_sigma(g, fourier_diff_matrix(6), ess, 0.0), InvalidArgument);
}

TEST_CASE("rescale homomorphism and tie alignment") {
  const Matrix d = fourier_diff_matrix(8);
  Rng rng = substream(10, 0);
  const Matrix w = gaussian_matrix(8, 8, rng);
  const TheoryLimit lim = theory_limit_noise(w, d);
  CHECK((rescale_homomorphism(lim.p_limit, lim.t_r, lim.u) - Matrix::Identity(8, 8)).norm() < 1e-10);
  const Matrix u = random_orthogonal(8, rng).leftCols(3);
  CHECK((rescale_homomorphism(Matrix::Identity(8, 8), u, u) - Matrix::Identity(3, 3)).norm() < 1e-12);

  // Rotating inside a tie cluster is invisible to eta, and alignment undoes it.
  const Matrix a = gaussian_matrix(8, 50, rng);
  const Matrix p = descramble_closed(d, a).p;
  const Matrix t = smooth_basis_of(d).vectors;
  Matrix rot = Matrix::Identity(8, 8);
  const double th = 0.7;
  rot.block(2, 2, 2, 2) << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const Matrix q = t * rot * t.transpose() * p;
  CHECK(eta_smoothness(d, q, a) == doctest::Approx(eta_smoothness(d, p, a)).epsilon(1e-10));
  CHECK((align_within_smooth_ties(q, d, p) - p).norm() < 1e-10);
}

TEST_CASE("report files") {
  const Matrix d = fourier_diff_matrix(4);
  Rng rng = substream(11, 0);
  const Matrix w = gaussian_matrix(4, 6, rng);
  const DescrambleReport rep = descramble_closed(d, w);
  const fs::path dir = fs::temp_directory_path() / "descramble_tests" / "report";
  fs::remove_all(dir);
  write_report(rep, dir, &w);
  CHECK(fs::exists(dir / "P.bin"));
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "descrambled_W.bin"));
  CHECK(fs::exists(dir / "fourier_view.csv"));
  CHECK((read_matrix_bin(dir / "P.bin") - rep.p).norm() == 0.0);
  CHECK(parse_method("closed") == Method::kClosedForm);
  CHECK(parse_method(to_string(Method::kManifold)) == Method::kManifold);
  CHECK_THROWS_AS(parse_method("magic"), InvalidArgument);
}
