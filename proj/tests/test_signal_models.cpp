#include "descramble/signal_models.hpp"
#include "descramble/stencils.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace descramble;

TEST_CASE("isotropic noise") {
  const Index n = 100000;
  const Matrix x = sample_noise(4, n, 1);
  CHECK(x.rowwise().mean().cwiseAbs().maxCoeff() <= 4 / std::sqrt(double(n)));
  CHECK((x * x.transpose() / double(n) - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 0.05);
  CHECK((sample_noise(3, 50, 9) - sample_noise(3, 50, 9)).norm() == 0.0);
  CHECK((sample_noise(3, 50, 9).leftCols(20) - sample_noise(3, 20, 9)).norm() == 0.0);
  CHECK_THROWS_AS(sample_noise(0, 5, 1), InvalidArgument);
}

TEST_CASE("oscillatory phase model") {
  const Vector s = oscillatory_signal(8, 0.0);
  CHECK((s.head(8).array() - 1).abs().maxCoeff() == 0.0);
  CHECK(s.tail(8).cwiseAbs().maxCoeff() == 0.0);

  DataModelSpec spec = default_model_spec(ModelKind::kOscillatory);
  spec.sigma = 0.0;
  const Matrix x = oscillatory_sample(spec, 500, 3);
  CHECK((x.colwise().norm().array() - std::sqrt(16.0)).abs().maxCoeff() < 1e-12);

  // Phase average of ||A s||^2 equals ||A||_F^2 in the complex encoding.
  Rng rng = substream(5, 0);
  const Matrix a = gaussian_matrix(6, 16, rng);
  const Index n = 100000;
  const Matrix c = complex_columns_as_samples(oscillatory_sample(spec, n, 8));
  const double avg = (a * c).squaredNorm() / double(n);
  CHECK(std::abs(avg - a.squaredNorm()) / a.squaredNorm() < 0.01);

  const Matrix stacked = (Matrix(4, 2) << 1, 2, 3, 4, 5, 6, 7, 8).finished();
  const Matrix split = complex_columns_as_samples(stacked);
  CHECK(split.rows() == 2);
  CHECK(split(0, 2) == 5);
  CHECK(split(1, 3) == 8);

  spec.osc.u = 0;
  spec.osc.v = 0;
  CHECK_THROWS_AS(oscillatory_sample(spec, 1, 1), InvalidArgument);
}

TEST_CASE("oscillatory autocorrelation") {
  DataModelSpec spec = default_model_spec(ModelKind::kOscillatory);
  const Matrix e = signal_autocorr(spec, AutocorrMode::kAnalytic, 0, 0, OscEncoding::kComplex);
  CHECK((e - Matrix::Identity(16, 16)).norm() == 0.0);
  const Matrix mc = signal_autocorr(spec, AutocorrMode::kMonteCarlo, 100000, 4, OscEncoding::kComplex);
  CHECK((mc - e).cwiseAbs().maxCoeff() < 0.02);
  const Matrix st = signal_autocorr(spec, AutocorrMode::kAnalytic, 0, 0, OscEncoding::kStacked);
  const Matrix st_mc = signal_autocorr(spec, AutocorrMode::kMonteCarlo, 100000, 4, OscEncoding::kStacked);
  CHECK((st - st_mc).cwiseAbs().maxCoeff() < 0.02);
  CHECK(signal_autocorr(default_model_spec(ModelKind::kNoise), AutocorrMode::kAnalytic, 0, 0).norm() == 0.0);
  CHECK_THROWS_AS(signal_autocorr(default_model_spec(ModelKind::kDeer), AutocorrMode::kAnalytic, 0, 0),
                  InvalidArgument);
}

TEST_CASE("DEER kernel") {
  const DeerConstants k;
  CHECK(deer_kernel(3.0, 0.0, k) == 1.0);
  const double r = 3.0;
  const double t_small = 1e-8 / k.dipolar_frequency(r);
  CHECK(std::abs(deer_kernel(r, t_small, k) - 1.0) <= 1e-6);
  // Against direct quadrature of the orientation average.
  for (double dt : {0.05, 0.5, 2.0, 5.0, 12.0, 40.0}) {
    const double t = dt / k.dipolar_frequency(r);
    CHECK(std::abs(deer_kernel(r, t, k) - oracle::dipolar_kernel(dt)) < 1e-8);
  }
  // Depends on (r, t) only through D t.
  const double r2 = 4.5, t1 = 0.7;
  const double t2 = t1 * k.dipolar_frequency(r) / k.dipolar_frequency(r2);
  CHECK(deer_kernel(r, t1, k) == doctest::Approx(deer_kernel(r2, t2, k)).epsilon(1e-12));
  const Vector rg = linspace(1.5, 8.0, 256), tg = linspace(0.0, 3.2, 256);
  double worst = 0;
  for (Index i = 0; i < rg.size(); ++i)
    for (Index j = 0; j < tg.size(); ++j) worst = std::max(worst, std::abs(deer_kernel(rg(i), tg(j), k)));
  CHECK(worst <= 1.1);
  CHECK_THROWS_AS(deer_kernel(0.0, 1.0, k), InvalidArgument);
  CHECK_THROWS_AS(deer_kernel(1.0, -1.0, k), InvalidArgument);
}

TEST_CASE("DEER operator and sampler") {
  const Vector rg = linspace(1.5, 8.0, 64), tg = linspace(0.0, 3.2, 48);
  const Vector w = trapezoid_weights(rg);
  CHECK(w.sum() == doctest::Approx(6.5));
  const Matrix k = deer_operator(rg, tg);
  CHECK(k.rows() == 48);
  CHECK(k.cols() == 64);
  Vector delta = Vector::Zero(64);
  delta(10) = 1;
  CHECK((k * delta - k.col(10)).norm() == 0.0);
  const Matrix one = deer_operator(rg, tg, [](double, double) { return 1.0; });
  Vector p = Vector::Ones(64) / 64.0;
  CHECK(((one * p).array() - w.dot(p)).abs().maxCoeff() < 1e-14);

  // Grid refinement: the quadrature of a smooth distribution converges at second order.
  auto smooth_kp = [&](Index n) {
    const Vector r = linspace(1.5, 8.0, n);
    Vector q(n);
    for (Index i = 0; i < n; ++i) q(i) = std::exp(-std::pow((r(i) - 4.0) / 0.7, 2));
    return Vector(deer_operator(r, tg) * q);
  };
  const double e1 = (smooth_kp(65) - smooth_kp(257)).cwiseAbs().maxCoeff();
  const double e2 = (smooth_kp(129) - smooth_kp(257)).cwiseAbs().maxCoeff();
  CHECK(e2 < e1 / 2.5);

  DeerParams params;
  params.r_grid = rg;
  params.t_grid = tg;
  const LabeledBatch clean = sample_deer(k, params, 200, 0.0, 5);
  CHECK((clean.targets.colwise().sum().array() - 1).abs().maxCoeff() < 1e-12);
  CHECK(clean.targets.minCoeff() >= 0.0);
  CHECK((clean.inputs - k * clean.targets).norm() < 1e-12);

  const DataModelSpec spec = default_model_spec(ModelKind::kDeer);
  const Matrix kk = deer_operator(spec.deer.r_grid, spec.deer.t_grid);
  const double sigma = deer_sigma_for_snr(kk, spec.deer, 10.0, 3);
  const LabeledBatch b = sample_deer(kk, spec.deer, 500, sigma, 4);
  const Eigen::ArrayXd snr = (kk * b.targets).colwise().norm().array() / (sigma * std::sqrt(256.0));
  CHECK(std::abs(snr.mean() - 10.0) <= 2.0);
}

TEST_CASE("DEER Monte Carlo autocorrelation converges") {
  DataModelSpec spec = default_model_spec(ModelKind::kDeer);
  spec.dim = 32;
  spec.deer.r_grid = linspace(1.5, 8.0, 32);
  spec.deer.t_grid = linspace(0.0, 3.2, 32);
  const Matrix a = signal_autocorr(spec, AutocorrMode::kMonteCarlo, 100000, 1);
  const Matrix b = signal_autocorr(spec, AutocorrMode::kMonteCarlo, 200000, 2);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 0.01 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("biexponential decays") {
  const Vector t = (Vector(3) << 0, 100, 400).finished();
  const Vector y = biexp_signal(0.6, 0.4, 50, 500, t);
  CHECK(y(0) == doctest::Approx(1.0));
  CHECK(y(1) == doctest::Approx(0.6 * std::exp(-2.0) + 0.4 * std::exp(-0.2)));
  CHECK(y(1) == doctest::Approx(0.40869).epsilon(1e-4));
  CHECK((biexp_signal(0.7, 0.0, 80, 200, t).array() - 0.7 * (-t.array() / 80).exp()).abs().maxCoeff() < 1e-15);

  DataModelSpec spec = default_model_spec(ModelKind::kBiexp);
  spec.sigma = 0.0;
  const LabeledBatch b = sample_biexp(spec, 20, 11);
  for (Index j = 0; j < 20; ++j)
    CHECK((b.inputs.col(j) - biexp_signal(0.6, 0.4, b.targets(0, j), b.targets(1, j), spec.biexp.times)).norm() == 0.0);
  CHECK((sample_biexp(spec, 20, 11).inputs - b.inputs).norm() == 0.0);

  const LabeledBatch big = sample_biexp(spec, 100000, 12);
  CHECK(std::abs(big.targets.row(0).mean() - 275.0) < 2.0);
  CHECK(std::abs(big.targets.row(1).mean() - 275.0) < 2.0);
}

TEST_CASE("Tikhonov NLLS fit") {
  const Vector times = linspace(0.0, 800.0, 64);
  BiexpFitOptions opt;
  const Vector y = biexp_signal(0.6, 0.4, 120, 380, times);
  const BiexpFit f = nlls_tikhonov(y, times, opt);
  CHECK(std::abs(f.t21 - 120) / 120 < 1e-4);
  CHECK(std::abs(f.t22 - 380) / 380 < 1e-4);
  CHECK(f.r2 > 0.999999);

  BiexpFitOptions eq = opt;
  eq.c1 = eq.c2 = 0.5;
  const BiexpFit ridge = nlls_tikhonov(biexp_signal(0.5, 0.5, 200, 200, times), times, eq);
  CHECK(ridge.residual < 1e-10);
  CHECK(ridge.t21 <= ridge.t22);

  // Signed amplitudes by variable projection.
  BiexpFitOptions free = opt;
  free.free_amplitudes = true;
  free.t_lo = 1;
  free.t_hi = 5000;
  const BiexpFit g = nlls_tikhonov(biexp_signal(1.3, -0.8, 60, 300, times), times, free);
  CHECK(g.r2 > 0.999999);
  CHECK(biexp_fit_curve(g, times).isApprox(biexp_signal(1.3, -0.8, 60, 300, times), 1e-5));

  // The penalty pulls estimates toward zero.
  BiexpFitOptions pen = opt;
  pen.lambda = 10.0;
  const BiexpFit p = nlls_tikhonov(y, times, pen);
  CHECK(p.t21 + p.t22 < f.t21 + f.t22);
  CHECK(p.objective > p.residual);
}

TEST_CASE("input layer concatenation") {
  DataModelSpec spec = default_model_spec(ModelKind::kBiexp);
  spec.sigma = 0.05;
  const LabeledBatch b = sample_biexp(spec, 40, 21);
  const LabeledBatch nn = ilr_concat(b, IlrMode::kNdNd);
  CHECK(nn.inputs.rows() == 128);
  CHECK((nn.inputs.topRows(64) - nn.inputs.bottomRows(64)).norm() == 0.0);

  spec.sigma = 0.0;
  const LabeledBatch clean = ilr_concat(sample_biexp(spec, 10, 22), IlrMode::kNdReg);
  CHECK((clean.inputs.topRows(64) - clean.inputs.bottomRows(64)).cwiseAbs().maxCoeff() < 1e-3);  // small Tikhonov bias

  spec.sigma = 1.0;
  const LabeledBatch noisy = ilr_concat(sample_biexp(spec, 60, 23), IlrMode::kNdReg);
  const Matrix d = finite_diff_matrix({StencilKind::kFiniteDifference, 64, 1, FdBoundary::kOneSided});
  int smoother = 0;
  for (Index j = 0; j < 60; ++j) {
    CHECK((noisy.inputs.col(j).head(64) - noisy.inputs.col(j).tail(64)).norm() > 0.0);
    if ((d * noisy.inputs.col(j).tail(64)).norm() <= (d * noisy.inputs.col(j).head(64)).norm()) ++smoother;
  }
  CHECK(smoother >= 57);
  CHECK(parse_ilr_mode("nd_reg") == IlrMode::kNdReg);
  CHECK_THROWS_AS(parse_ilr_mode("reg"), InvalidArgument);
}
