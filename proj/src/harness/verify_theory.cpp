#include "common.hpp"

#include "descramble/fresnel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace descramble::harness {

namespace {

// tr(P^T L P C): eta for data with second moment C.
double eta_from_moments(const Matrix& l, const Matrix& p, const Matrix& c) { return (p.transpose() * l * p * c).trace(); }

// Distance of the descrambler's singular-vector estimate P^T T_r from U_1.
double limit_distance(const Matrix& p, const Matrix& t_r, const Matrix& u1) {
  return subspace_dist(p.transpose() * t_r, u1);
}

}  // namespace

VerificationResult verify_solvers(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const int instances = static_cast<int>(cfg.get_int("solvers.instances", 20));
  const std::vector<double> sizes = cfg.get_doubles("solvers.sizes", {8, 16, 32});
  const Index n = cfg.get_int("solvers.samples", 1024);
  const int probes = static_cast<int>(cfg.get_int("solvers.probes", 10000));
  const double tol = cfg.get_double("solvers.tolerance", 1e-6);
  ManifoldOptions mopt;
  mopt.restarts = static_cast<int>(cfg.get_int("solvers.restarts", 1));
  mopt.max_iters = static_cast<int>(cfg.get_int("solvers.max_iters", 5000));
  const std::uint64_t seed = ctx.seed("solvers");

  Table t{{"instance", "m", "eta_closed", "eta_manifold", "rel_gap", "best_probe_margin", "manifold_iters",
           "manifold_grad_norm"}, {}};
  double worst_gap = 0.0, worst_margin = std::numeric_limits<double>::infinity();
  int admissible = 0;
  for (int i = 0; i < instances; ++i) {
    const auto m = static_cast<Index>(sizes[static_cast<std::size_t>(i) % sizes.size()]);
    const Matrix d = fourier_diff_matrix(m);
    const Matrix a = sample_noise(m, n, substream(seed, static_cast<std::uint64_t>(i))());
    if (is_admissible(a / std::sqrt(double(n)))) ++admissible;
    const DescrambleReport closed = descramble_closed(d, a);
    mopt.seed = substream(seed, 1000 + static_cast<std::uint64_t>(i))();
    const DescrambleReport man = descramble_manifold(d, a, mopt);
    const double gap = std::abs(closed.objective - man.objective) / std::max(1.0, closed.objective);

    // Random orthogonal probes must never beat the closed form.
    const Matrix l = d.transpose() * d;
    const Matrix c = a * a.transpose() / static_cast<double>(n);
    Rng prng = substream(seed, 2000 + static_cast<std::uint64_t>(i));
    double best_probe = std::numeric_limits<double>::infinity();
    for (int k = 0; k < probes; ++k) best_probe = std::min(best_probe, eta_from_moments(l, random_orthogonal(m, prng), c));
    const double margin = (best_probe - closed.objective) / std::max(1.0, closed.objective);

    worst_gap = std::max(worst_gap, gap);
    worst_margin = std::min(worst_margin, margin);
    t.add({double(i), double(m), closed.objective, man.objective, gap, margin, double(man.diagnostics.iterations),
           man.diagnostics.grad_norm});
  }
  write_table_csv(t, ctx.file("solvers.csv"));
  res.tables.push_back(ctx.file("solvers.csv"));
  res.add(check_le("max relative objective gap closed vs manifold", worst_gap, tol));
  res.add(check_ge("min (best probe - closed) / max(1, eta)", worst_margin, 0.0));
  res.add(record("admissible instances", admissible));
  return res;
}

VerificationResult verify_thm1(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const Index m = cfg.get_int("thm1.m", 16);
  const Index d_in = cfg.get_int("thm1.d", 24);
  const long long n_full = cfg.get_int("thm1.n_max", 100000);
  const long long n_max = ctx.samples("thm1.n_max", 100000);
  const long long n_min = cfg.get_int("thm1.n_min", 100);
  const int points = static_cast<int>(cfg.get_int("thm1.points", 7));
  const int seeds = static_cast<int>(cfg.get_int("thm1.seeds", 5));
  const std::string kind = cfg.get_string("thm1.w", "designed");
  const double ratio = cfg.get_double("thm1.ratio", 1.4);
  const double thr = ctx.mc_threshold("thm1.threshold", 0.05, n_full, n_max);
  const StencilSpec sspec = stencil_from_config(cfg, "thm1", m);
  const Matrix d = make_stencil(sspec);
  const std::uint64_t seed = ctx.seed("thm1");
  const std::vector<long long> grid = log_grid(n_min, n_max, points);

  Table t{{"seed", "N", "dist"}, {}};
  std::vector<double> mean_dist(grid.size(), 0.0);
  double worst_final = 0.0, worst_cos = 1.0;
  for (int s = 0; s < seeds; ++s) {
    int retries = 0;
    const Matrix w = experiment_matrix(kind, m, d_in, ratio, substream(seed, static_cast<std::uint64_t>(s))(), &retries);
    if (retries > 0) res.notes.push_back("seed " + std::to_string(s) + ": redrew W " + std::to_string(retries) + " times");
    const TheoryLimit lim = theory_limit_noise(w, d);
    const Matrix x = sample_noise(d_in, n_max, substream(seed, 100 + static_cast<std::uint64_t>(s))());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Matrix a = w * x.leftCols(grid[g]);
      const DescrambleReport rep = descramble_closed(d, a);
      const double dist = limit_distance(rep.p, lim.t_r, lim.u);
      t.add({double(s), double(grid[g]), dist});
      mean_dist[g] += dist / seeds;
      if (g + 1 == grid.size()) {
        worst_final = std::max(worst_final, dist);
        // Left singular vectors of the descrambled weights against the smooth modes.
        const EconSVD dw = econ_svd(rep.p * w);
        for (Index j = 0; j < dw.rank(); ++j) worst_cos = std::min(worst_cos, std::abs(dw.u.col(j).dot(lim.t_r.col(j))));
      }
    }
  }
  std::vector<double> ns(grid.begin(), grid.end());
  const double slope = loglog_slope(ns, mean_dist);
  write_table_csv(t, ctx.file("thm1_dist.csv"));
  res.tables.push_back(ctx.file("thm1_dist.csv"));
  std::vector<double> ref;
  for (double nv : ns) ref.push_back(mean_dist.front() * std::sqrt(ns.front() / nv));
  write_line_svg({{"mean distance", ns, mean_dist}, {"N^-1/2 reference", ns, ref}},
                 {"Distance to the large-N limit", "N", "aligned distance", true, true}, ctx.file("thm1_dist.svg"));
  res.figures.push_back(ctx.file("thm1_dist.svg"));

  // Fixed point: W whose left singular vectors already are the smooth modes.
  Rng frng = substream(seed, 999);
  const Matrix wfix = designed_matrix(m, d_in, ratio, frng);
  const EconSVD fsvd = econ_svd(wfix);
  const Matrix wfixed = theory_limit_noise(wfix, d).t_r * fsvd.s.asDiagonal() * fsvd.v.transpose();
  const TheoryLimit flim = theory_limit_noise(wfixed, d);
  const double fixed_defect = (flim.p_limit * wfixed - wfixed).norm() / wfixed.norm();

  res.add(check_le("max distance at N_max over seeds", worst_final, thr));
  res.add(check_in("log-log slope of mean distance vs N", slope, cfg.get_double("thm1.slope_lo", -0.65),
                   cfg.get_double("thm1.slope_hi", -0.35)));
  res.add(check_ge("min |cos| of descrambled left singular vectors vs T_r at N_max", worst_cos,
                   cfg.get_double("thm1.cosine", 0.99)));
  res.add(check_le("fixed point: ||P_limit W - W|| / ||W|| when U_1 = T_r", fixed_defect, 1e-10));
  res.add(record("N_max used", double(n_max)));
  return res;
}

VerificationResult verify_thm2(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const Index mm = cfg.get_int("thm2.M", 6);  // oscillatory length; W is 2M x 2M
  const Index m = 2 * mm;
  const double s_lo = cfg.get_double("thm2.sigma_lo", 10.0), s_hi = cfg.get_double("thm2.sigma_hi", 1000.0);
  const double fit_lo = cfg.get_double("thm2.fit_lo", 100.0);
  const int points = static_cast<int>(cfg.get_int("thm2.points", 31));
  const std::uint64_t seed = ctx.seed("thm2");
  const Matrix d = fourier_diff_matrix(m);

  DataModelSpec spec = default_model_spec(ModelKind::kOscillatory);
  spec.dim = mm;
  const Matrix e = signal_autocorr(spec, AutocorrMode::kAnalytic, 0, 0, OscEncoding::kStacked);
  int retries = 0;
  const Matrix w = experiment_matrix(cfg.get_string("thm2.w", "gaussian"), m, m, 1.4, seed, &retries);

  Table t{{"sigma", "dist_op", "dist_fro", "bound"}, {}};
  std::vector<double> sig, dop, fit_s, fit_d;
  double worst_ratio = 0.0, max_jump = 1.0;
  for (int i = 0; i < points; ++i) {
    const double s = std::pow(10.0, std::log10(s_lo) + (std::log10(s_hi) - std::log10(s_lo)) * i / (points - 1));
    const TheoryLimit lim = theory_limit_sigma(w, d, e, s);
    if (!lim.bound) throw std::runtime_error("thm2: eigengap of W W^T is zero");
    t.add({s, lim.dist_op, lim.dist_fro, *lim.bound});
    worst_ratio = std::max(worst_ratio, lim.dist_op / *lim.bound);
    if (!dop.empty() && dop.back() > 0 && lim.dist_op > 0)
      max_jump = std::max(max_jump, std::max(lim.dist_op / dop.back(), dop.back() / lim.dist_op));
    sig.push_back(s);
    dop.push_back(lim.dist_op);
    if (s >= fit_lo * (1 - 1e-12)) {
      fit_s.push_back(s);
      fit_d.push_back(lim.dist_op);
    }
  }
  const double slope = loglog_slope(fit_s, fit_d);
  write_table_csv(t, ctx.file("thm2_sweep.csv"));
  res.tables.push_back(ctx.file("thm2_sweep.csv"));
  write_line_svg({{"distance (operator)", sig, dop}, {"bound", sig, t.column("bound")}},
                 {"Singular vectors of Sigma(sigma) vs U_1", "sigma", "distance", true, true},
                 ctx.file("thm2_sweep.svg"));
  res.figures.push_back(ctx.file("thm2_sweep.svg"));

  // Formula echo at the first grid point.
  const double s0 = sig.front();
  const double c = eigengap(w * w.transpose());
  const double hand = std::pow(2.0, 1.5) / (s0 * s0) * op_norm(w * e * w.transpose()) / c;
  const double echo = std::abs(hand - t.rows.front()[3]) / hand;

  // Commuting control: diagonal W and diagonal E.
  Vector dg(m);
  for (Index i = 0; i < m; ++i) dg(i) = double(m - i);
  const Matrix wdiag = dg.asDiagonal();
  const TheoryLimit comm = theory_limit_sigma(wdiag, d, e.diagonal().asDiagonal(), s0);

  res.add(check_le("max distance / bound over the sweep", worst_ratio, 1.0));
  res.add(check_in("log-log slope of distance vs sigma on the asymptotic decade", slope,
                   cfg.get_double("thm2.slope_lo", -2.2), cfg.get_double("thm2.slope_hi", -1.8)));
  res.add(check_lt("max ratio between adjacent distances", max_jump, 10.0));
  res.add(check_le("bound recomputed by hand, relative difference", echo, 1e-12));
  res.add(check_le("commuting case distance", comm.dist_op, 1e-12));
  res.add(record("eigengap C of W W^T", c));
  res.add(record("slope in Frobenius norm", loglog_slope(fit_s, [&] {
                   std::vector<double> f;
                   for (const auto& r : t.rows)
                     if (r[0] >= fit_lo * (1 - 1e-12)) f.push_back(r[2]);
                   return f;
                 }())));
  return res;
}

namespace {

// Symmetric filter whose circulant has eigenvalue magnitudes ordered like the
// smoothness order of the Fourier stencil: DC > Nyquist > 1 > 2 > ... > m/2-1.
Vector ordered_symmetric_filter(Index m, Rng& rng) {
  const Index half = m / 2;
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  Vector lam(m);
  std::vector<Index> order = {0, half};
  for (Index k = 1; k < half; ++k) order.push_back(k);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const double v = 3.0 - 0.25 * static_cast<double>(r) + jitter(rng);
    lam(order[r]) = v;
    if (order[r] != 0 && order[r] != half) lam(m - order[r]) = v;
  }
  Vector w(m);
  for (Index j = 0; j < m; ++j) {
    double acc = 0.0;
    for (Index k = 0; k < m; ++k) acc += lam(k) * std::cos(2.0 * std::numbers::pi * double(j * k) / double(m));
    w(j) = acc / double(m);
  }
  return w;
}

struct CnnRun {
  double eta_gap_population = 0.0;
  double eta_gap_sample = 0.0;
  double aligned_defect = 0.0;
};

CnnRun cnn_pipeline(const Matrix& w, const Matrix& d, Index n, std::uint64_t seed) {
  CnnRun out;
  const Matrix ident = Matrix::Identity(w.rows(), w.rows());
  const DescrambleReport pop = descramble_closed(d, w);
  const double eta_i = eta_smoothness(d, ident, w);
  out.eta_gap_population = (eta_i - pop.objective) / eta_i;
  const Matrix a = w * sample_noise(w.cols(), n, seed);
  const DescrambleReport rep = descramble_closed(d, a);
  const double eta_is = eta_smoothness(d, ident, a);
  out.eta_gap_sample = (eta_is - rep.objective) / eta_is;
  const Matrix aligned = align_within_smooth_ties(rep.p, d, ident);
  out.aligned_defect = (aligned * w - w).norm() / w.norm();
  return out;
}

}  // namespace

VerificationResult verify_cnn(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const Index m = cfg.get_int("cnn.m", 16);
  const long long n_full = cfg.get_int("cnn.n", 100000);
  const long long n = ctx.samples("cnn.n", 100000);
  const double thr = ctx.mc_threshold("cnn.threshold", 0.05, n_full, n);
  const std::uint64_t seed = ctx.seed("cnn");
  const Matrix d = fourier_diff_matrix(m);

  Rng rng = substream(seed, 0);
  const Vector filt = ordered_symmetric_filter(m, rng);
  const Matrix w = circulant_from_filter(filt, m);
  const CnnRun main = cnn_pipeline(w, d, n, substream(seed, 1)());

  Rng crng = substream(seed, 2);
  const Matrix wctl = gaussian_matrix(m, m, crng);
  const CnnRun ctl = cnn_pipeline(wctl, d, n, substream(seed, 3)());

  Vector tri_filter = Vector::Zero(m);
  tri_filter(0) = 2.0;
  tri_filter(1) = 1.0;
  tri_filter(m - 1) = 1.0;
  const CnnRun alt = cnn_pipeline(circulant_from_filter(tri_filter, m), d, n, substream(seed, 4)());

  const Matrix ident = Matrix::Identity(m, m);
  const DescrambleReport delta = descramble_closed(d, ident);
  const double delta_gap = std::abs(eta_smoothness(d, ident, ident) - delta.objective) / delta.objective;

  Table t{{"case", "eta_gap_population", "eta_gap_sample", "aligned_defect"}, {}};
  t.add({0, main.eta_gap_population, main.eta_gap_sample, main.aligned_defect});
  t.add({1, ctl.eta_gap_population, ctl.eta_gap_sample, ctl.aligned_defect});
  t.add({2, alt.eta_gap_population, alt.eta_gap_sample, alt.aligned_defect});
  write_table_csv(t, ctx.file("cnn.csv"));
  res.tables.push_back(ctx.file("cnn.csv"));
  Vector fw = filt;
  write_table_csv(Table{{"tap", "weight"}, [&] {
                          std::vector<std::vector<double>> rows;
                          for (Index i = 0; i < m; ++i) rows.push_back({double(i), fw(i)});
                          return rows;
                        }()},
                  ctx.file("cnn_filter.csv"));
  res.tables.push_back(ctx.file("cnn_filter.csv"));
  res.notes.push_back("case 0: ordered symmetric filter; case 1: gaussian control; case 2: filter [2,1,0,...,0,1]");

  res.add(check_le("(eta(I) - eta(P)) / eta(I), population moments", main.eta_gap_population, 1e-9));
  res.add(check_le("aligned ||P W - W|| / ||W|| at N", main.aligned_defect, thr));
  res.add(check_le("control: gaussian W, aligned ||P W - W|| / ||W||", ctl.aligned_defect, thr, CheckRole::kControl));
  res.add(record("(eta(I) - eta(P)) / eta(I), sample moments", main.eta_gap_sample));
  res.add(record("filter [2,1,0,...,0,1]: population eta gap", alt.eta_gap_population));
  res.add(record("filter [2,1,0,...,0,1]: aligned defect", alt.aligned_defect));
  res.add(check_le("delta filter: eta invariant", delta_gap, 1e-12));
  return res;
}

VerificationResult verify_oda(const RunContext& ctx) {
  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;
  using CVector = Eigen::VectorXcd;
  const Config& cfg = ctx.config;
  VerificationResult res;
  const Index mm = cfg.get_int("oda.M", 16);
  const int u = static_cast<int>(cfg.get_int("oda.u", 1)), v = static_cast<int>(cfg.get_int("oda.v", 1));
  const int nodes = static_cast<int>(cfg.get_int("oda.nodes", 10000));
  const std::uint64_t seed = ctx.seed("oda");
  const double lo = -double(u) * mm, hi = double(v) * mm, len = hi - lo;

  // Periodic trapezoid rule over the full phase interval.
  auto signal = [&](double alpha) {
    CVector s(mm);
    for (Index k = 0; k < mm; ++k) s(k) = std::polar(1.0, 2.0 * std::numbers::pi * double(k) * alpha / double(mm));
    return s;
  };
  auto average_norm2 = [&](const CMatrix& a) {
    double acc = 0.0;
    for (int q = 0; q < nodes; ++q) acc += (a * signal(lo + len * q / nodes)).squaredNorm();
    return acc / nodes;
  };
  double worst_kd = 0.0;
  for (Index k = 0; k < mm; ++k)
    for (Index l = 0; l < mm; ++l) {
      if (k == l) continue;
      Complex acc = 0.0;
      for (int q = 0; q < nodes; ++q)
        acc += std::polar(1.0, 2.0 * std::numbers::pi * double(k - l) * (lo + len * q / nodes) / double(mm));
      worst_kd = std::max(worst_kd, std::abs(acc / double(nodes)));
    }
  Table qt{{"trial", "average", "frobenius2", "rel_err"}, {}};
  double worst_rel = 0.0;
  Rng rng = substream(seed, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix a = gaussian_matrix(mm, mm, rng).cast<Complex>() + Complex(0, 1) * gaussian_matrix(mm, mm, rng).cast<Complex>();
    const double avg = average_norm2(a), fro = a.squaredNorm();
    worst_rel = std::max(worst_rel, std::abs(avg - fro) / fro);
    qt.add({double(trial), avg, fro, std::abs(avg - fro) / fro});
  }
  const double ident_avg = average_norm2(CMatrix::Identity(mm, mm));
  write_table_csv(qt, ctx.file("oda_quadrature.csv"));
  res.tables.push_back(ctx.file("oda_quadrature.csv"));

  DataModelSpec spec = default_model_spec(ModelKind::kOscillatory);
  spec.dim = mm;
  spec.osc.u = u;
  spec.osc.v = v;
  const Matrix e_complex = signal_autocorr(spec, AutocorrMode::kAnalytic, 0, 0, OscEncoding::kComplex);

  // End-to-end: real layer on the complex data, descrambled against the limit.
  const long long n_full = cfg.get_int("oda.n", 100000);
  const long long n = ctx.samples("oda.n", 100000);
  const double thr = ctx.mc_threshold("oda.threshold", 0.08, n_full, n);
  spec.sigma = cfg.get_double("oda.sigma", 1.0);
  const Index m = cfg.get_int("oda.m", 16);
  const Matrix d = fourier_diff_matrix(m);
  const Matrix w = experiment_matrix(cfg.get_string("oda.w", "designed"), m, mm, cfg.get_double("oda.ratio", 1.4),
                                     substream(seed, 1)());
  const Matrix x = oscillatory_sample(spec, n, substream(seed, 2)());
  const TheoryLimit lim = theory_limit_noise(w, d);
  const DescrambleReport rep = descramble_closed(d, w * complex_columns_as_samples(x));
  const double dist = limit_distance(rep.p, lim.t_r, lim.u);

  // Stacked real encoding for comparison: its second moment is not isotropic.
  const Matrix ws = experiment_matrix("designed", m, 2 * mm, cfg.get_double("oda.ratio", 1.4), substream(seed, 3)());
  const TheoryLimit slim = theory_limit_noise(ws, d);
  const DescrambleReport srep = descramble_closed(d, ws * x);
  const double sdist = limit_distance(srep.p, slim.t_r, slim.u);

  Table et{{"N", "dist_complex", "dist_stacked"}, {{double(n), dist, sdist}}};
  write_table_csv(et, ctx.file("oda_end_to_end.csv"));
  res.tables.push_back(ctx.file("oda_end_to_end.csv"));

  res.add(check_le("max |full-period integral of exp(2 pi i (k-l) a / M)|, k != l", worst_kd, 1e-10));
  res.add(check_le("max relative error of phase average of ||A s||^2 vs ||A||_F^2", worst_rel, 0.005));
  res.add(check_le("A = I: |average - M|", std::abs(ident_avg - double(mm)), 1e-9));
  res.add(check_le("analytic complex autocorrelation: ||E - I||_F", (e_complex - Matrix::Identity(mm, mm)).norm(), 0.0));
  res.add(check_le("end-to-end distance to T_r U_1^T (complex encoding)", dist, thr));
  res.add(record("end-to-end distance, stacked real encoding", sdist));
  return res;
}

VerificationResult verify_mds(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const int count = static_cast<int>(cfg.get_int("mds.count", 50));
  const int probes = static_cast<int>(cfg.get_int("mds.probes", 10000));
  const std::uint64_t seed = ctx.seed("mds");
  Rng rng = substream(seed, 0);
  Table t{{"trial", "n", "trace", "nuclear", "rel_err", "best_probe_excess"}, {}};
  double worst = 0.0, worst_excess = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) {
    const Index n = 2 + i % 7;
    const Matrix w = gaussian_matrix(n, n, rng);
    const DescrambleReport rep = mds_descrambler(w);
    const double nuc = singular_values(w).sum();
    const double rel = std::abs(rep.objective - nuc) / nuc;
    worst = std::max(worst, rel);
    double excess = -std::numeric_limits<double>::infinity();
    if (i < 5) {
      for (int k = 0; k < probes; ++k) excess = std::max(excess, ((random_orthogonal(n, rng) * w).trace() - nuc) / nuc);
      worst_excess = std::max(worst_excess, excess);
    }
    t.add({double(i), double(n), rep.objective, nuc, rel, std::isfinite(excess) ? excess : 0.0});
  }
  write_table_csv(t, ctx.file("mds.csv"));
  res.tables.push_back(ctx.file("mds.csv"));

  // Exhaustive O(2) search on a 2x2 instance.
  const Matrix w2 = gaussian_matrix(2, 2, rng);
  double best = -std::numeric_limits<double>::infinity();
  const double step = 1e-4;
  for (double th = 0.0; th < 2.0 * std::numbers::pi; th += step) {
    const double c = std::cos(th), s = std::sin(th);
    Matrix rot(2, 2), refl(2, 2);
    rot << c, -s, s, c;
    refl << c, s, s, -c;
    best = std::max({best, (rot * w2).trace(), (refl * w2).trace()});
  }
  const double nuc2 = singular_values(w2).sum();
  const DescrambleReport r2 = mds_descrambler(w2);

  Matrix dg(2, 2);
  dg << 2, 0, 0, 1;
  const DescrambleReport rd = mds_descrambler(dg);
  const DescrambleReport rn = mds_descrambler(-Matrix::Identity(2, 2));

  res.add(check_le("max relative |Tr(PW) - nuclear norm| over random W", worst, 1e-8));
  res.add(check_le("max (best random probe - nuclear) / nuclear", worst_excess, 1e-12));
  res.add(check_le("2x2 grid maximum vs nuclear norm, relative", std::abs(best - nuc2) / nuc2, 1e-6));
  res.add(check_le("2x2 closed form vs nuclear norm, relative", std::abs(r2.objective - nuc2) / nuc2, 1e-12));
  res.add(check_le("diag(2,1): ||P - I|| + |Tr - 3|", (rd.p - Matrix::Identity(2, 2)).norm() + std::abs(rd.objective - 3.0), 1e-12));
  res.add(check_le("-I: ||P + I|| + |Tr - 2|", (rn.p + Matrix::Identity(2, 2)).norm() + std::abs(rn.objective - 2.0), 1e-12));
  return res;
}

VerificationResult verify_kernel(const RunContext& ctx) {
  VerificationResult res;
  // Independent series oracle in extended precision.
  auto series = [](long double x, bool cosine) {
    long double sum = 0.0L, fact = 1.0L;
    for (int n = 0; n < 40; ++n) {
      const int k = cosine ? 2 * n : 2 * n + 1;
      // (2n)! for C, (2n+1)! for S
      if (n > 0) fact *= (cosine ? (2.0L * n - 1) * (2.0L * n) : (2.0L * n) * (2.0L * n + 1));
      const long double term = std::pow(x, 2 * k + 1) / (fact * (2 * k + 1));
      sum += (n % 2 == 0 ? term : -term);
    }
    return sum;
  };
  const double c1 = fresnel_c(1.0), s1 = fresnel_s(1.0);
  const double c_err = std::abs(c1 - double(series(1.0L, true)));
  const double s_err = std::abs(s1 - double(series(1.0L, false)));
  const double limit = std::sqrt(std::numbers::pi / 8.0);

  const DeerConstants consts;
  const double r = 3.0;
  const double t_small = 1e-8 / consts.dipolar_frequency(r);
  const double g_small = deer_kernel(r, t_small, consts);

  const DataModelSpec spec = default_model_spec(ModelKind::kDeer);
  double gmax = 0.0;
  for (Index i = 0; i < spec.deer.r_grid.size(); ++i)
    for (Index j = 0; j < spec.deer.t_grid.size(); ++j)
      gmax = std::max(gmax, std::abs(deer_kernel(spec.deer.r_grid(i), spec.deer.t_grid(j), consts)));

  // Same D t, different (r, t).
  const double r2 = 5.0, t2 = 0.7;
  const double dt = consts.dipolar_frequency(r2) * t2;
  const double same = std::abs(deer_kernel(r2, t2, consts) - deer_kernel(2.0, dt / consts.dipolar_frequency(2.0), consts));

  const FresnelPair below = fresnel(2.0), above = fresnel(std::nextafter(2.0, 3.0));

  Table t{{"x", "C", "S"}, {}};
  for (int i = 0; i <= 200; ++i) {
    const double x = 0.05 * i;
    const FresnelPair f = fresnel(x);
    t.add({x, f.c, f.s});
  }
  write_table_csv(t, ctx.file("fresnel.csv"));
  res.tables.push_back(ctx.file("fresnel.csv"));
  write_line_svg({{"C(x)", t.column("x"), t.column("C")}, {"S(x)", t.column("x"), t.column("S")}},
                 {"Fresnel integrals", "x", "value"}, ctx.file("fresnel.svg"));
  res.figures.push_back(ctx.file("fresnel.svg"));

  res.add(check_le("|C(1) - series|", c_err, 1e-8));
  res.add(check_le("|S(1) - series|", s_err, 1e-8));
  res.add(check_le("|gamma - 1| at D t = 1e-8", std::abs(g_small - 1.0), 1e-6));
  res.add(check_le("|C(50) - sqrt(pi/8)|", std::abs(fresnel_c(50.0) - limit), 1e-2));
  res.add(check_le("|S(50) - sqrt(pi/8)|", std::abs(fresnel_s(50.0) - limit), 1e-2));
  res.add(check_le("max |gamma| over the experiment grid", gmax, 1.1));
  res.add(check_le("gamma depends on (r, t) only through D t", same, 1e-12));
  res.add(record("jump in C across the series/continued fraction switch", std::abs(below.c - above.c)));
  return res;
}

VerificationResult verify_splitting(const RunContext& ctx) {
  const Config& cfg = ctx.config;
  VerificationResult res;
  const Index mm = cfg.get_int("splitting.M", 8);
  const Index m = 2 * mm;
  const long long n = ctx.samples("splitting.n", 100000);
  const double sigma = cfg.get_double("splitting.sigma", 0.5);
  const int trials = static_cast<int>(cfg.get_int("splitting.trials", 5));
  const std::uint64_t seed = ctx.seed("splitting");
  const Matrix d = fourier_diff_matrix(m);

  DataModelSpec spec = default_model_spec(ModelKind::kOscillatory);
  spec.dim = mm;
  spec.sigma = 0.0;
  const Matrix s = oscillatory_sample(spec, n, substream(seed, 0)());
  const Matrix xi = sample_noise(m, n, substream(seed, 1)());
  const Matrix e = signal_autocorr(spec, AutocorrMode::kAnalytic, 0, 0, OscEncoding::kStacked);
  Rng rng = substream(seed, 2);
  const Matrix w = gaussian_matrix(m, m, rng);

  Table t{{"trial", "eta_mc", "signal_term", "noise_term", "predicted", "std_err", "z", "cross_z"}, {}};
  double worst_z = 0.0, worst_cross = 0.0;
  for (int i = 0; i < trials; ++i) {
    const Matrix p = random_orthogonal(m, rng);
    const Matrix b = d * p * w;
    const Matrix bs = b * s, bn = b * xi;
    const Matrix y = bs + sigma * bn;
    const Eigen::ArrayXd q = y.colwise().squaredNorm().transpose().array();
    const double eta = q.mean();
    const double se = std::sqrt((q - eta).square().sum() / double(n - 1) / double(n));
    const double sig_term = (b * e * b.transpose()).trace();
    const double noise_term = b.squaredNorm();
    const double pred = sig_term + sigma * sigma * noise_term;
    const double z = std::abs(eta - pred) / se;
    const Eigen::ArrayXd cross = 2.0 * sigma * (bs.array() * bn.array()).colwise().sum().transpose();
    const double cse = std::sqrt((cross - cross.mean()).square().sum() / double(n - 1) / double(n));
    const double cz = std::abs(cross.mean()) / cse;
    worst_z = std::max(worst_z, z);
    worst_cross = std::max(worst_cross, cz);
    t.add({double(i), eta, sig_term, noise_term, pred, se, z, cz});
  }
  write_table_csv(t, ctx.file("splitting.csv"));
  res.tables.push_back(ctx.file("splitting.csv"));
  res.add(check_le("max |eta_MC - (signal + sigma^2 noise)| in standard errors", worst_z, 4.0));
  res.add(record("max |cross term| in standard errors", worst_cross));
  return res;
}

}  // namespace descramble::harness
