#include "descramble/signal_models.hpp"

#include "descramble/fresnel.hpp"

#include <algorithm>
#include <cmath>

namespace descramble {

ModelKind parse_model_kind(const std::string& s) {
  if (s == "noise") return ModelKind::kNoise;
  if (s == "oscillatory") return ModelKind::kOscillatory;
  if (s == "deer") return ModelKind::kDeer;
  if (s == "biexp") return ModelKind::kBiexp;
  throw InvalidArgument("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kNoise: return "noise";
    case ModelKind::kOscillatory: return "oscillatory";
    case ModelKind::kDeer: return "deer";
    case ModelKind::kBiexp: return "biexp";
  }
  return "?";
}

IlrMode parse_ilr_mode(const std::string& s) {
  if (s == "nd_nd") return IlrMode::kNdNd;
  if (s == "nd_reg") return IlrMode::kNdReg;
  throw InvalidArgument("unknown ilr mode '" + s + "'");
}

std::string to_string(IlrMode m) { return m == IlrMode::kNdNd ? "nd_nd" : "nd_reg"; }

namespace {

void require_increasing(const Vector& g, const char* what) {
  if (g.size() < 2) throw InvalidArgument(std::string(what) + ": grid needs at least 2 points");
  for (Index i = 1; i < g.size(); ++i)
    if (!(g(i) > g(i - 1))) throw InvalidArgument(std::string(what) + ": grid not strictly increasing");
}

}  // namespace

void DataModelSpec::validate() const {
  if (dim < 1) throw InvalidArgument("DataModelSpec: dim must be >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidArgument("DataModelSpec: sigma must be >= 0");
  switch (kind) {
    case ModelKind::kNoise: break;
    case ModelKind::kOscillatory:
      if (osc.u + osc.v < 1) throw InvalidArgument("DataModelSpec: oscillatory needs u + v >= 1");
      break;
    case ModelKind::kDeer:
      require_increasing(deer.r_grid, "DataModelSpec.deer.r_grid");
      require_increasing(deer.t_grid, "DataModelSpec.deer.t_grid");
      if (deer.r_grid(0) <= 0.0) throw InvalidArgument("DataModelSpec: distances must be positive");
      if (deer.t_grid.size() != dim) throw InvalidArgument("DataModelSpec: t_grid length must equal dim");
      break;
    case ModelKind::kBiexp:
      require_increasing(biexp.times, "DataModelSpec.biexp.times");
      if (biexp.times.size() != dim) throw InvalidArgument("DataModelSpec: times length must equal dim");
      if (!(biexp.t2_lo > 0.0 && biexp.t2_hi > biexp.t2_lo))
        throw InvalidArgument("DataModelSpec: bad T2 range");
      if (biexp.c1 < 0.0 || biexp.c2 < 0.0) throw InvalidArgument("DataModelSpec: negative amplitude");
      if (biexp.normalized && std::abs(biexp.c1 + biexp.c2 - 1.0) > 1e-12)
        throw InvalidArgument("DataModelSpec: normalized amplitudes must sum to 1");
      if (biexp.tikhonov_lambda < 0.0) throw InvalidArgument("DataModelSpec: negative lambda");
      break;
  }
}

Vector linspace(double lo, double hi, Index n) {
  if (n < 1) throw InvalidArgument("linspace: n must be >= 1");
  if (n == 1) return Vector::Constant(1, lo);
  return Vector::LinSpaced(n, lo, hi);
}

DataModelSpec default_model_spec(ModelKind kind) {
  DataModelSpec spec;
  spec.kind = kind;
  switch (kind) {
    case ModelKind::kNoise: spec.dim = 16; spec.sigma = 1.0; break;
    case ModelKind::kOscillatory: spec.dim = 16; spec.sigma = 1.0; break;
    case ModelKind::kDeer:
      spec.dim = 256;
      spec.deer.r_grid = linspace(1.5, 8.0, 256);
      spec.deer.t_grid = linspace(0.0, 3.2, 256);
      spec.sigma = 0.0;
      break;
    case ModelKind::kBiexp:
      spec.dim = 64;
      spec.biexp.times = linspace(0.0, 800.0, 64);
      spec.sigma = 0.01;
      break;
  }
  return spec;
}

Matrix sample_noise(Index d, Index n, std::uint64_t seed) {
  if (d < 1 || n < 1) throw InvalidArgument("sample_noise: dimensions must be >= 1");
  Matrix x(d, n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < n; ++j) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(j));
    for (Index i = 0; i < d; ++i) x(i, j) = normal(rng);
  }
  return x;
}

Vector oscillatory_signal(Index m, double alpha) {
  Vector s(2 * m);
  for (Index k = 0; k < m; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) * alpha / static_cast<double>(m);
    s(k) = std::cos(phase);
    s(m + k) = std::sin(phase);
  }
  return s;
}

Matrix oscillatory_sample(const DataModelSpec& spec, Index n, std::uint64_t seed) {
  if (spec.kind != ModelKind::kOscillatory) throw InvalidArgument("oscillatory_sample: wrong model kind");
  spec.validate();
  const Index m = spec.dim;
  const double lo = -static_cast<double>(spec.osc.u) * m;
  const double hi = static_cast<double>(spec.osc.v) * m;
  Matrix x(2 * m, n);
  std::uniform_real_distribution<double> phase(lo, hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < n; ++j) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(j));
    x.col(j) = oscillatory_signal(m, phase(rng));
    if (spec.sigma > 0.0)
      for (Index i = 0; i < 2 * m; ++i) x(i, j) += spec.sigma * normal(rng);
  }
  return x;
}

Matrix complex_columns_as_samples(const Matrix& stacked) {
  if (stacked.rows() % 2 != 0) throw InvalidArgument("complex_columns_as_samples: odd row count");
  const Index m = stacked.rows() / 2;
  Matrix out(m, 2 * stacked.cols());
  out.leftCols(stacked.cols()) = stacked.topRows(m);
  out.rightCols(stacked.cols()) = stacked.bottomRows(m);
  return out;
}

double deer_kernel(double r, double t, const DeerConstants& constants) {
  if (!(r > 0.0)) throw InvalidArgument("deer_kernel: distance must be positive");
  if (t < 0.0) throw InvalidArgument("deer_kernel: time must be nonnegative");
  const double dt = constants.dipolar_frequency(r) * t;
  if (dt == 0.0) return 1.0;
  // Powder average integral_0^1 cos((3z^2 - 1) D t) dz. With C(x) = int cos(t^2)
  // the argument is sqrt(3 D t); sqrt(6 D t / pi) belongs to the cos(pi t^2 / 2) convention.
  const double x = std::sqrt(3.0 * dt);
  const FresnelPair f = fresnel(x);
  return (std::cos(dt) * f.c + std::sin(dt) * f.s) / x;
}

Vector trapezoid_weights(const Vector& grid) {
  require_increasing(grid, "trapezoid_weights");
  const Index n = grid.size();
  Vector w(n);
  w(0) = 0.5 * (grid(1) - grid(0));
  w(n - 1) = 0.5 * (grid(n - 1) - grid(n - 2));
  for (Index i = 1; i + 1 < n; ++i) w(i) = 0.5 * (grid(i + 1) - grid(i - 1));
  return w;
}

Matrix deer_operator(const Vector& r_grid, const Vector& t_grid,
                     const std::function<double(double, double)>& kernel) {
  const Vector w = trapezoid_weights(r_grid);
  require_increasing(t_grid, "deer_operator");
  Matrix k(t_grid.size(), r_grid.size());
  for (Index i = 0; i < r_grid.size(); ++i)
    for (Index j = 0; j < t_grid.size(); ++j) k(j, i) = kernel(r_grid(i), t_grid(j)) * w(i);
  return k;
}

Matrix deer_operator(const Vector& r_grid, const Vector& t_grid, const DeerConstants& constants) {
  return deer_operator(r_grid, t_grid, [&](double r, double t) { return deer_kernel(r, t, constants); });
}

Vector deer_prior_sample(const Vector& r_grid, const DeerPrior& prior, Rng& rng) {
  std::uniform_int_distribution<int> modes(prior.min_modes, prior.max_modes);
  std::uniform_real_distribution<double> center(prior.center_lo, prior.center_hi);
  std::uniform_real_distribution<double> width(prior.width_lo, prior.width_hi);
  std::uniform_real_distribution<double> weight(0.2, 1.0);
  const int count = modes(rng);
  Vector p = Vector::Zero(r_grid.size());
  for (int b = 0; b < count; ++b) {
    const double c = center(rng);
    const double w = width(rng);
    const double a = weight(rng);
    for (Index i = 0; i < r_grid.size(); ++i) {
      const double z = (r_grid(i) - c) / w;
      p(i) += a * std::exp(-0.5 * z * z);
    }
  }
  p = p.cwiseMax(0.0);
  const double total = p.sum();
  if (!(total > 0.0)) {
    p.setConstant(1.0 / static_cast<double>(p.size()));
  } else {
    p /= total;
  }
  return p;
}

LabeledBatch sample_deer(const Matrix& k, const DeerParams& params, Index n, double sigma,
                         std::uint64_t seed) {
  if (k.cols() != params.r_grid.size()) throw InvalidArgument("sample_deer: K columns != r grid size");
  if (!(sigma >= 0.0)) throw InvalidArgument("sample_deer: sigma must be >= 0");
  LabeledBatch batch;
  batch.seed = seed;
  batch.spec.kind = ModelKind::kDeer;
  batch.spec.dim = k.rows();
  batch.spec.sigma = sigma;
  batch.spec.deer = params;
  batch.targets.resize(k.cols(), n);
  batch.inputs.resize(k.rows(), n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < n; ++j) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(j));
    batch.targets.col(j) = deer_prior_sample(params.r_grid, params.prior, rng);
    batch.inputs.col(j) = k * batch.targets.col(j);
    if (sigma > 0.0)
      for (Index i = 0; i < k.rows(); ++i) batch.inputs(i, j) += sigma * normal(rng);
  }
  return batch;
}

double deer_sigma_for_snr(const Matrix& k, const DeerParams& params, double snr, std::uint64_t seed,
                          Index pilot) {
  if (!(snr > 0.0)) throw InvalidArgument("deer_sigma_for_snr: snr must be positive");
  const LabeledBatch b = sample_deer(k, params, pilot, 0.0, seed);
  const double mean_norm = b.inputs.colwise().norm().mean();
  return mean_norm / (snr * std::sqrt(static_cast<double>(k.rows())));
}

Vector biexp_signal(double c1, double c2, double t21, double t22, const Vector& times) {
  if (!(t21 > 0.0) || !(t22 > 0.0)) throw InvalidArgument("biexp_signal: time constants must be positive");
  return (c1 * (-times.array() / t21).exp() + c2 * (-times.array() / t22).exp()).matrix();
}

LabeledBatch sample_biexp(const DataModelSpec& spec, Index n, std::uint64_t seed) {
  if (spec.kind != ModelKind::kBiexp) throw InvalidArgument("sample_biexp: wrong model kind");
  spec.validate();
  const BiexpParams& bp = spec.biexp;
  LabeledBatch batch;
  batch.seed = seed;
  batch.spec = spec;
  batch.inputs.resize(spec.dim, n);
  batch.targets.resize(2, n);
  std::uniform_real_distribution<double> t2(bp.t2_lo, bp.t2_hi);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index j = 0; j < n; ++j) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(j));
    const double a = t2(rng);
    const double b = t2(rng);
    batch.targets(0, j) = a;
    batch.targets(1, j) = b;
    batch.inputs.col(j) = biexp_signal(bp.c1, bp.c2, a, b, bp.times);
    if (spec.sigma > 0.0)
      for (Index i = 0; i < spec.dim; ++i) batch.inputs(i, j) += spec.sigma * normal(rng);
  }
  return batch;
}

LabeledBatch ilr_concat(const LabeledBatch& batch, IlrMode mode) {
  if (batch.spec.kind != ModelKind::kBiexp) throw InvalidArgument("ilr_concat: batch is not biexponential");
  const Index d = batch.inputs.rows();
  const Index n = batch.inputs.cols();
  LabeledBatch out;
  out.seed = batch.seed;
  out.spec = batch.spec;
  out.spec.biexp.ilr_mode = mode;
  out.targets = batch.targets;
  out.inputs.resize(2 * d, n);
  out.inputs.topRows(d) = batch.inputs;
  if (mode == IlrMode::kNdNd) {
    out.inputs.bottomRows(d) = batch.inputs;
    return out;
  }
  const BiexpParams& bp = batch.spec.biexp;
  BiexpFitOptions opt;
  opt.c1 = bp.c1;
  opt.c2 = bp.c2;
  opt.lambda = bp.tikhonov_lambda;
  opt.penalty_scale = bp.penalty_scale;
  opt.t_lo = bp.t2_lo;
  opt.t_hi = bp.t2_hi;
  opt.multistart = bp.multistart;
  for (Index j = 0; j < n; ++j) {
    opt.seed = substream(batch.seed, static_cast<std::uint64_t>(j) + 0x5eed)();
    const BiexpFit fit = nlls_tikhonov(batch.inputs.col(j), bp.times, opt);
    out.inputs.col(j).tail(d) = biexp_signal(bp.c1, bp.c2, fit.t21, fit.t22, bp.times);
  }
  return out;
}

Matrix signal_autocorr(const DataModelSpec& spec, AutocorrMode mode, Index m, std::uint64_t seed,
                       OscEncoding encoding) {
  spec.validate();
  switch (spec.kind) {
    case ModelKind::kNoise: return Matrix::Zero(spec.dim, spec.dim);
    case ModelKind::kOscillatory: {
      const Index M = spec.dim;
      if (mode == AutocorrMode::kAnalytic) {
        // Averages over an integer number of periods: cross terms vanish.
        if (encoding == OscEncoding::kComplex) return Matrix::Identity(M, M);
        Matrix e = 0.5 * Matrix::Identity(2 * M, 2 * M);
        e(0, 0) = 1.0;  // Re s_0 = 1
        e(M, M) = 0.0;  // Im s_0 = 0
        return e;
      }
      DataModelSpec noiseless = spec;
      noiseless.sigma = 0.0;
      const Matrix x = oscillatory_sample(noiseless, m, seed);
      if (encoding == OscEncoding::kComplex) {
        const Matrix c = complex_columns_as_samples(x);
        return c * c.transpose() / static_cast<double>(m);
      }
      return x * x.transpose() / static_cast<double>(m);
    }
    case ModelKind::kDeer: {
      if (mode == AutocorrMode::kAnalytic) throw InvalidArgument("signal_autocorr: no closed form for deer");
      const Matrix k = deer_operator(spec.deer.r_grid, spec.deer.t_grid, spec.deer.constants);
      const LabeledBatch b = sample_deer(k, spec.deer, m, 0.0, seed);
      return b.inputs * b.inputs.transpose() / static_cast<double>(m);
    }
    case ModelKind::kBiexp: {
      if (mode == AutocorrMode::kAnalytic) throw InvalidArgument("signal_autocorr: no closed form for biexp");
      DataModelSpec noiseless = spec;
      noiseless.sigma = 0.0;
      const LabeledBatch b = sample_biexp(noiseless, m, seed);
      return b.inputs * b.inputs.transpose() / static_cast<double>(m);
    }
  }
  throw InvalidArgument("signal_autocorr: unknown model");
}

}  // namespace descramble
