#pragma once

#include "descramble/linalg.hpp"

#include <cstdint>
#include <functional>
#include <numbers>
#include <string>

namespace descramble {

enum class ModelKind { kNoise, kOscillatory, kDeer, kBiexp };
enum class IlrMode { kNdNd, kNdReg };

ModelKind parse_model_kind(const std::string& s);
std::string to_string(ModelKind k);
IlrMode parse_ilr_mode(const std::string& s);
std::string to_string(IlrMode m);

/// Phase prior alpha ~ Unif[-u M, v M]; M is DataModelSpec::dim.
struct OscillatoryParams {
  int u = 1;
  int v = 1;
};

/// Dipolar coupling D(r) = (mu0 / 4 pi) gamma1 gamma2 h / r^3. Defaults are
/// dimensionless and put D t in roughly [0, 40] over the default grids.
struct DeerConstants {
  double mu0 = 4.0 * std::numbers::pi;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double h = 42.1875;

  double coupling() const { return mu0 / (4.0 * std::numbers::pi) * gamma1 * gamma2 * h; }
  double dipolar_frequency(double r) const { return coupling() / (r * r * r); }
};

/// Mixture of 1..3 Gaussian bumps on the distance grid, clipped at zero and
/// normalized to unit sum.
struct DeerPrior {
  int min_modes = 1;
  int max_modes = 3;
  double center_lo = 2.0;
  double center_hi = 7.0;
  double width_lo = 0.1;
  double width_hi = 0.6;
};

struct DeerParams {
  Vector r_grid;
  Vector t_grid;
  DeerConstants constants;
  DeerPrior prior;
};

struct BiexpParams {
  double c1 = 0.6;
  double c2 = 0.4;
  double t2_lo = 50.0;
  double t2_hi = 500.0;
  Vector times;
  IlrMode ilr_mode = IlrMode::kNdNd;
  double tikhonov_lambda = 1.6e-4;
  double penalty_scale = 500.0;  // the penalty is lambda * ||theta / penalty_scale||^2
  int multistart = 4;
  bool normalized = true;  // c1 + c2 = 1
};

/// Training-data distribution x = s(z) + sigma * xi.
struct DataModelSpec {
  ModelKind kind = ModelKind::kNoise;
  Index dim = 0;
  double sigma = 0.0;
  OscillatoryParams osc;
  DeerParams deer;
  BiexpParams biexp;

  void validate() const;
};

/// Defaults used by the harness: oscillatory M = 16, DEER 256 x 256 grids
/// (r in [1.5, 8], t in [0, 3.2]), biexponential 64 times in [0, 800].
DataModelSpec default_model_spec(ModelKind kind);

struct LabeledBatch {
  Matrix inputs;   // d x N, one sample per column
  Matrix targets;  // p x N
  std::uint64_t seed = 0;
  DataModelSpec spec;
};

Vector linspace(double lo, double hi, Index n);

// Isotropic noise.

/// d x n standard normal samples; column j is drawn from substream(seed, j).
Matrix sample_noise(Index d, Index n, std::uint64_t seed);

// Oscillatory phase model s(alpha)_k = exp(2 pi i k alpha / M), k = 0..M-1,
// stored as the stacked real vector [Re s; Im s] of length 2M.

Vector oscillatory_signal(Index m, double alpha);
Matrix oscillatory_sample(const DataModelSpec& spec, Index n, std::uint64_t seed);

/// Reinterprets a stacked [Re; Im] batch (2M x n) as the M x 2n real matrix
/// [Re X, Im X]. A real layer W applied to it gives the real and imaginary
/// parts of W x as separate columns, so ||D P W X||_F^2 is the complex norm.
Matrix complex_columns_as_samples(const Matrix& stacked);

// DEER.

/// Dipolar kernel gamma(r, t); returns the analytic limit 1 at t = 0.
double deer_kernel(double r, double t, const DeerConstants& constants = {});

/// Trapezoid weights for a strictly increasing grid.
Vector trapezoid_weights(const Vector& grid);

/// K(j, i) = kernel(r_i, t_j) * dr_i, so Gamma = K p approximates the integral.
Matrix deer_operator(const Vector& r_grid, const Vector& t_grid, const DeerConstants& constants = {});
Matrix deer_operator(const Vector& r_grid, const Vector& t_grid,
                     const std::function<double(double, double)>& kernel);

Vector deer_prior_sample(const Vector& r_grid, const DeerPrior& prior, Rng& rng);

/// Inputs Gamma_i = K p_i + sigma xi, targets p_i.
LabeledBatch sample_deer(const Matrix& k, const DeerParams& params, Index n, double sigma,
                         std::uint64_t seed);

/// Noise level giving mean ||K p|| / (sigma sqrt(rows)) = snr over a pilot batch.
double deer_sigma_for_snr(const Matrix& k, const DeerParams& params, double snr,
                          std::uint64_t seed, Index pilot = 2000);

// Biexponential relaxometry.

Vector biexp_signal(double c1, double c2, double t21, double t22, const Vector& times);

/// Targets (T21, T22) uniform on [t2_lo, t2_hi]^2; inputs are the noisy decays.
LabeledBatch sample_biexp(const DataModelSpec& spec, Index n, std::uint64_t seed);

struct BiexpFitOptions {
  double c1 = 0.6;
  double c2 = 0.4;
  double lambda = 0.0;
  double penalty_scale = 500.0;
  double t_lo = 50.0;
  double t_hi = 500.0;
  int multistart = 4;
  std::uint64_t seed = 0;
  bool free_amplitudes = false;  // fit signed c1, c2 by variable projection
  int max_iters = 200;
};

struct BiexpFit {
  double t21 = 0.0;
  double t22 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double residual = 0.0;   // ||y - model||^2
  double objective = 0.0;  // residual + penalty
  double r2 = 0.0;
  int iterations = 0;
};

/// Minimizes ||y - biexp(theta)||^2 + lambda ||theta / penalty_scale||^2 over
/// the box [t_lo, t_hi]^2 from several starts and returns the best. With
/// fixed amplitudes a damped Gauss-Newton (Levenberg-Marquardt) iteration with
/// the analytic Jacobian is used.
BiexpFit nlls_tikhonov(const Vector& y, const Vector& times, const BiexpFitOptions& options);

Vector biexp_fit_curve(const BiexpFit& fit, const Vector& times);

/// 2 * dim inputs: [ND; ND] or [ND; Reg] with Reg the NLLS-regularized decay.
LabeledBatch ilr_concat(const LabeledBatch& batch, IlrMode mode);

enum class AutocorrMode { kAnalytic, kMonteCarlo };
enum class OscEncoding { kStacked, kComplex };

/// Estimate of E[s(z) s(z)^T]. Analytic for noise (zero) and oscillatory
/// models; Monte Carlo with m samples otherwise.
Matrix signal_autocorr(const DataModelSpec& spec, AutocorrMode mode, Index m, std::uint64_t seed,
                       OscEncoding encoding = OscEncoding::kStacked);

}  // namespace descramble
