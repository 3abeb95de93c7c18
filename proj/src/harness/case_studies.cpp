#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace descramble::harness {

namespace {

/// Symmetric PSD square root through the eigendecomposition; tiny negative
/// eigenvalues from Monte Carlo rounding are clamped to zero.
Matrix psd_sqrt(const Matrix& s) {
  const SymEig e = sym_eig_ascending(0.5 * (s + s.transpose()));
  const Vector root = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * root.asDiagonal() * e.vectors.transpose();
}

Table loss_table(const TrainResult& tr) {
  Table t{{"epoch", "rmse"}, {{0.0, tr.initial_loss}}};
  for (std::size_t e = 0; e < tr.loss.size(); ++e) t.add({double(e + 1), tr.loss[e]});
  return t;
}

struct Alignment {
  double score = 0.0;
  double base_mean = 0.0;
  double base_std = 0.0;
  double threshold() const { return base_mean - 3.0 * base_std; }
};

Alignment baseline_for(const Matrix& basis, Index rows, Index cols, Index top, int draws, std::uint64_t seed) {
  Rng rng = substream(seed, 0xba5e);
  std::vector<double> base;
  for (int i = 0; i < draws; ++i) base.push_back(mean_angle_top_right(gaussian_matrix(rows, cols, rng), basis, top));
  return {0.0, mean_of(base), stddev_of(base)};
}

}  // namespace

VerificationResult run_deernet(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const std::uint64_t seed = ctx.seed("deernet");
  const Index grid = cfg.get_int("deernet.grid", 256);
  const Index hidden = cfg.get_int("deernet.hidden", 80);
  const Index n = ctx.samples("deernet.n", 5000);
  const Index top = cfg.get_int("deernet.top", 10);

  DataModelSpec spec = default_model_spec(ModelKind::kDeer);
  spec.deer.r_grid = linspace(1.5, 8.0, grid);
  spec.deer.t_grid = linspace(0.0, 3.2, grid);
  const Matrix k = deer_operator(spec.deer.r_grid, spec.deer.t_grid, spec.deer.constants);
  // The kernel integrates a unit-sum distribution, so the raw echo is of
  // order mean(dr); rescale inputs to order one before training.
  const double in_scale = 1.0 / trapezoid_weights(spec.deer.r_grid).mean();
  const double sigma = deer_sigma_for_snr(k, spec.deer, cfg.get_double("deernet.snr", 10.0), substream(seed, 1)());
  const LabeledBatch batch = sample_deer(k, spec.deer, n, sigma, substream(seed, 2)());
  const Matrix x = batch.inputs * in_scale;
  res.notes.push_back("noise sigma " + std::to_string(sigma) + ", input scale " + std::to_string(in_scale));

  NetArch arch{{grid, hidden, grid}, {Activation::kTanh, Activation::kSigmoid}, true};
  const FeedForwardNet net0 = init_net(arch, substream(seed, 3)());
  TrainConfig tc;
  tc.epochs = ctx.epochs("deernet.epochs", 200);
  tc.learning_rate = cfg.get_double("deernet.lr", 1e-3);
  tc.batch_size = cfg.get_int("deernet.batch", 64);
  tc.seed = substream(seed, 4)();
  const TrainResult tr = train(net0, x, batch.targets, tc);
  if (tr.diverged) res.notes.push_back("training diverged at epoch " + std::to_string(tr.diverged_epoch));
  write_table_csv(loss_table(tr), ctx.file("loss.csv"));
  res.tables.push_back(ctx.file("loss.csv"));
  save_net(tr.net, ctx.file("net"));

  // Directions the data actually excites: left singular vectors of K sqrt(Sigma_z)
  // with Sigma_z the (uncentered) second moment of the distance prior.
  const Index m_prior = cfg.get_int("deernet.prior_samples", 20000);
  const LabeledBatch prior = sample_deer(k, spec.deer, m_prior, 0.0, substream(seed, 5)());
  const Matrix sigma_z = prior.targets * prior.targets.transpose() / static_cast<double>(m_prior);
  const Matrix basis = econ_svd(k * psd_sqrt(sigma_z), 0.0).u.leftCols(top);

  Alignment al = baseline_for(basis, hidden, grid, top, static_cast<int>(cfg.get_int("deernet.baseline_draws", 200)),
                              seed);
  al.score = mean_angle_top_right(tr.net.layers[0].weight, basis, top);
  const double untrained = mean_angle_top_right(net0.layers[0].weight, basis, top);
  write_table_csv(Table{{"trained", "untrained", "baseline_mean", "baseline_std", "threshold"},
                        {{al.score, untrained, al.base_mean, al.base_std, al.threshold()}}},
                  ctx.file("alignment.csv"));
  res.tables.push_back(ctx.file("alignment.csv"));

  // Descrambled first layer and its Fourier view.
  const Matrix d = make_stencil(stencil_from_config(cfg, "deernet", hidden));
  const DescrambleReport rep = descramble_layer(tr.net, 1, x, d, Method::kClosedForm);
  const Matrix& w1 = tr.net.layers[0].weight;
  write_report(rep, ctx.file("descrambled"), &w1);
  const Matrix pw = rep.p * w1;
  write_heatmap_svg(pw, "descrambled first layer", ctx.file("descrambled_w1.svg"));
  write_heatmap_svg(dft2_magnitude(pw), "Fourier view, descrambled first layer", ctx.file("fourier_w1.svg"));
  const EconSVD ks = econ_svd(k, 0.0);
  const Index kr = std::min<Index>(hidden, ks.rank());
  const Matrix kview = ks.s.head(kr).asDiagonal() * ks.v.leftCols(kr).transpose();
  write_matrix_csv(dft2_magnitude(kview), ctx.file("fourier_kernel.csv"));
  write_heatmap_svg(dft2_magnitude(kview), "Fourier view, scaled kernel right singular vectors",
                    ctx.file("fourier_kernel.svg"));
  res.figures.insert(res.figures.end(), {ctx.file("descrambled_w1.svg"), ctx.file("fourier_w1.svg"),
                                         ctx.file("fourier_kernel.svg")});
  Series ls{"training", {}, {}};
  for (std::size_t e = 0; e < tr.loss.size(); ++e) {
    ls.x.push_back(double(e + 1));
    ls.y.push_back(tr.loss[e]);
  }
  write_line_svg({ls}, PlotSpec{"training loss", "epoch", "RMSE", false, true}, ctx.file("loss.svg"));
  res.figures.push_back(ctx.file("loss.svg"));

  res.add(check_lt("mean principal angle, trained W1 vs data directions (rad)", al.score, al.threshold()));
  res.add(check_lt("control: untrained W1 mean principal angle", untrained, al.threshold(), CheckRole::kControl));
  res.add(check_lt("final training loss minus initial", tr.loss.empty() ? 0.0 : tr.loss.back() - tr.initial_loss, 0.0));
  res.add(record("descrambled tap smoothness eta", rep.objective));

  if (cfg.get_bool("deernet.noiseless_variant", true)) {
    const LabeledBatch clean = sample_deer(k, spec.deer, n, 0.0, substream(seed, 2)());
    const TrainResult tc0 = train(net0, clean.inputs * in_scale, clean.targets, tc);
    res.add(record("noiseless training: final loss", tc0.loss.empty() ? tc0.initial_loss : tc0.loss.back()));
    res.add(record("noiseless training: mean principal angle",
                   mean_angle_top_right(tc0.net.layers[0].weight, basis, top)));
  }
  return res;
}

namespace {

struct HalfFits {
  double min_r2 = 1.0;
  double distance = 0.0;  // ||fit(top half) - fit(bottom half)|| / ||fit(top half)||
};

HalfFits fit_halves(const Vector& v, const Vector& times, const BiexpFitOptions& opt) {
  const Index d = times.size();
  HalfFits h;
  Vector curves[2];
  for (int part = 0; part < 2; ++part) {
    const Vector y = v.segment(part * d, d);
    const BiexpFit f = nlls_tikhonov(y, times, opt);
    h.min_r2 = std::min(h.min_r2, f.r2);
    curves[part] = biexp_fit_curve(f, times);
  }
  h.distance = (curves[0] - curves[1]).norm() / std::max(curves[0].norm(), 1e-300);
  return h;
}

}  // namespace

VerificationResult run_ilr(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const std::uint64_t seed = ctx.seed("ilr");
  const Index n = ctx.samples("ilr.n", 4000);
  const Index top = cfg.get_int("ilr.top", 3);
  const double target_scale = cfg.get_double("ilr.target_scale", 500.0);
  const std::vector<double> snrs = cfg.get_doubles("ilr.snrs", {1.0, 30.0, 100.0});
  const double r2_gate_snr = cfg.get_double("ilr.r2_snr", 100.0);
  const std::vector<Index> hidden = [&] {
    std::vector<Index> h;
    for (double v : cfg.get_doubles("ilr.hidden", {32, 256, 256})) h.push_back(static_cast<Index>(v));
    return h;
  }();

  DataModelSpec spec = default_model_spec(ModelKind::kBiexp);
  BiexpFitOptions fopt;
  fopt.free_amplitudes = true;
  fopt.lambda = 0.0;
  fopt.t_lo = cfg.get_double("ilr.fit_t_lo", 1.0);
  fopt.t_hi = cfg.get_double("ilr.fit_t_hi", 5000.0);
  fopt.multistart = static_cast<int>(cfg.get_int("ilr.fit_starts", 4));
  fopt.seed = substream(seed, 9)();

  TrainConfig tc;
  tc.epochs = ctx.epochs("ilr.epochs", 60);
  tc.learning_rate = cfg.get_double("ilr.lr", 1e-3);
  tc.batch_size = cfg.get_int("ilr.batch", 64);

  Table t{{"snr", "mode", "vector", "min_r2", "half_distance", "final_loss", "initial_loss"}, {}};
  double r2_at_gate = 1.0, r2_low_snr = 1.0, untrained_r2 = 1.0;
  std::vector<double> dist_nd, dist_reg;
  double smooth_fraction_min = 1.0;
  for (std::size_t si = 0; si < snrs.size(); ++si) {
    spec.sigma = 1.0 / snrs[si];  // unit-sum amplitudes put the decay at 1 for t = 0
    const LabeledBatch base = sample_biexp(spec, n, substream(seed, 10 + si)());
    for (IlrMode mode : {IlrMode::kNdNd, IlrMode::kNdReg}) {
      const LabeledBatch b = ilr_concat(base, mode);
      const Index dim = b.inputs.rows();
      if (mode == IlrMode::kNdReg) {
        // The regularized half must be smoother than the raw decay it came from.
        const Matrix dd = finite_diff_matrix(StencilSpec{StencilKind::kFiniteDifference, dim / 2, 1, FdBoundary::kOneSided});
        const Eigen::ArrayXd rough_nd = (dd * b.inputs.topRows(dim / 2)).colwise().norm().transpose().array();
        const Eigen::ArrayXd rough_reg = (dd * b.inputs.bottomRows(dim / 2)).colwise().norm().transpose().array();
        smooth_fraction_min = std::min(smooth_fraction_min, (rough_reg <= rough_nd).cast<double>().mean());
      }
      NetArch arch;
      arch.dims = {dim};
      for (Index h : hidden) arch.dims.push_back(h);
      arch.dims.push_back(2);
      arch.activations.assign(hidden.size(), Activation::kRelu);
      arch.activations.push_back(Activation::kIdentity);
      const std::uint64_t ms = substream(seed, 100 + 2 * si + (mode == IlrMode::kNdReg))();
      const FeedForwardNet net0 = init_net(arch, ms);
      tc.seed = substream(ms, 1)();
      const TrainResult tr = train(net0, b.inputs, b.targets / target_scale, tc);
      if (tr.diverged) res.notes.push_back("training diverged at snr " + std::to_string(snrs[si]));
      const EconSVD svd = econ_svd(tr.net.layers[0].weight, 0.0);
      for (Index v = 0; v < std::min(top, svd.rank()); ++v) {
        const HalfFits hf = fit_halves(svd.v.col(v), spec.biexp.times, fopt);
        t.add({snrs[si], double(mode == IlrMode::kNdReg), double(v), hf.min_r2, hf.distance,
               tr.loss.empty() ? tr.initial_loss : tr.loss.back(), tr.initial_loss});
        (mode == IlrMode::kNdReg ? dist_reg : dist_nd).push_back(hf.distance);
        if (v == 0 && snrs[si] == r2_gate_snr) r2_at_gate = std::min(r2_at_gate, hf.min_r2);
        if (v == 0 && si == 0) r2_low_snr = std::min(r2_low_snr, hf.min_r2);
      }
      if (snrs[si] == r2_gate_snr && mode == IlrMode::kNdNd) {
        const EconSVD s0 = econ_svd(net0.layers[0].weight, 0.0);
        untrained_r2 = fit_halves(s0.v.col(0), spec.biexp.times, fopt).min_r2;
      }
    }
  }
  write_table_csv(t, ctx.file("ilr.csv"));
  res.tables.push_back(ctx.file("ilr.csv"));
  res.notes.push_back("targets divided by " + std::to_string(target_scale) + " for training");

  res.add(check_ge("leading right singular vector halves: min R^2 of biexponential fit at high SNR", r2_at_gate, 0.9));
  res.add(check_gt("mean half distance, ND/Reg minus ND/ND", mean_of(dist_reg) - mean_of(dist_nd), 0.0));
  res.add(check_ge("regularized half no rougher than raw decay (fraction of samples)", smooth_fraction_min, 0.95));
  res.add(check_ge("control: untrained W1 leading vector min R^2", untrained_r2, 0.9, CheckRole::kControl));
  res.add(record("leading vector min R^2 at lowest SNR", r2_low_snr));
  return res;
}

}  // namespace descramble::harness
