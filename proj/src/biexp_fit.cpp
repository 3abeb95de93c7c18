#include "descramble/signal_models.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace descramble {

namespace {

struct Eval {
  double residual = 0.0;
  double objective = 0.0;
};

Eval evaluate_fixed(const Vector& y, const Vector& times, const BiexpFitOptions& o, double a, double b) {
  const Vector r = y - biexp_signal(o.c1, o.c2, a, b, times);
  Eval e;
  e.residual = r.squaredNorm();
  const double pa = a / o.penalty_scale, pb = b / o.penalty_scale;
  e.objective = e.residual + o.lambda * (pa * pa + pb * pb);
  return e;
}

// Levenberg-Marquardt on the stacked residual [y - model; sqrt(lambda) theta / scale].
BiexpFit lm_from(const Vector& y, const Vector& times, const BiexpFitOptions& o, double a, double b) {
  const Index n = times.size();
  const double sl = std::sqrt(o.lambda) / o.penalty_scale;
  Eval cur = evaluate_fixed(y, times, o, a, b);
  double mu = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < o.max_iters && !converged; ++it) {
    Vector r(n + 2);
    Matrix j(n + 2, 2);
    r.head(n) = y - biexp_signal(o.c1, o.c2, a, b, times);
    r(n) = sl * a;
    r(n + 1) = sl * b;
    for (Index i = 0; i < n; ++i) {
      const double ea = std::exp(-times(i) / a), eb = std::exp(-times(i) / b);
      // d(residual)/dT = -c t / T^2 exp(-t / T)
      j(i, 0) = -o.c1 * times(i) / (a * a) * ea;
      j(i, 1) = -o.c2 * times(i) / (b * b) * eb;
    }
    j.row(n) << sl, 0.0;
    j.row(n + 1) << 0.0, sl;

    const Eigen::Matrix2d jtj = j.transpose() * j;
    const Eigen::Vector2d g = j.transpose() * r;
    if (g.norm() <= 1e-18 * std::max(1.0, cur.objective)) break;

    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Eigen::Matrix2d h = jtj;
      for (int d = 0; d < 2; ++d) h(d, d) += mu * std::max(jtj(d, d), 1e-30);
      const Eigen::Vector2d step = h.ldlt().solve(-g);
      const double na = std::clamp(a + step(0), o.t_lo, o.t_hi);
      const double nb = std::clamp(b + step(1), o.t_lo, o.t_hi);
      const Eval trial = evaluate_fixed(y, times, o, na, nb);
      if (std::isfinite(trial.objective) && trial.objective < cur.objective) {
        const double gain = cur.objective - trial.objective;
        const double moved = std::abs(na - a) + std::abs(nb - b);
        a = na;
        b = nb;
        cur = trial;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        converged = gain <= 1e-16 * std::max(cur.objective, 1e-300) || moved <= 1e-12 * (a + b);
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) break;
  }
  BiexpFit fit;
  fit.t21 = a;
  fit.t22 = b;
  fit.c1 = o.c1;
  fit.c2 = o.c2;
  fit.residual = cur.residual;
  fit.objective = cur.objective;
  fit.iterations = it;
  return fit;
}

// Variable projection: for fixed time constants the amplitudes solve a linear
// least-squares problem, leaving a 2-parameter search.
struct Projected {
  double c1 = 0.0, c2 = 0.0, residual = 0.0;
};

Projected project_amplitudes(const Vector& y, const Vector& times, double a, double b) {
  Matrix basis(times.size(), 2);
  basis.col(0) = (-times.array() / a).exp().matrix();
  basis.col(1) = (-times.array() / b).exp().matrix();
  const Eigen::ColPivHouseholderQR<Matrix> qr(basis);
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  if (qr.rank() == 2) {
    c = qr.solve(y);
  } else {
    const double c0 = basis.col(0).dot(y) / basis.col(0).squaredNorm();
    c(0) = c0;
  }
  Projected p;
  p.c1 = c(0);
  p.c2 = c(1);
  p.residual = (y - basis * c).squaredNorm();
  return p;
}

double free_objective(const Vector& y, const Vector& times, const BiexpFitOptions& o, double la, double lb) {
  const double a = std::exp(la), b = std::exp(lb);
  if (a < o.t_lo || a > o.t_hi || b < o.t_lo || b > o.t_hi) return std::numeric_limits<double>::infinity();
  const double pa = a / o.penalty_scale, pb = b / o.penalty_scale;
  return project_amplitudes(y, times, a, b).residual + o.lambda * (pa * pa + pb * pb);
}

BiexpFit fit_free(const Vector& y, const Vector& times, const BiexpFitOptions& o) {
  using P = Eigen::Vector2d;
  const double llo = std::log(o.t_lo), lhi = std::log(o.t_hi);
  auto f = [&](const P& p) { return free_objective(y, times, o, p(0), p(1)); };

  // Coarse grid over a <= b, then the best few seeds refined by Nelder-Mead.
  const int grid = 24;
  std::vector<std::pair<double, P>> seeds;
  for (int i = 0; i < grid; ++i)
    for (int k = i; k < grid; ++k) {
      const P p(llo + (lhi - llo) * (i + 0.5) / grid, llo + (lhi - llo) * (k + 0.5) / grid);
      seeds.emplace_back(f(p), p);
    }
  std::sort(seeds.begin(), seeds.end(), [](const auto& x, const auto& z) { return x.first < z.first; });
  const int refine = std::max(1, std::min<int>(o.multistart, static_cast<int>(seeds.size())));

  double best_val = std::numeric_limits<double>::infinity();
  P best = seeds.front().second;
  int total_iters = 0;
  const double h = 0.5 * (lhi - llo) / grid;
  for (int s = 0; s < refine; ++s) {
    std::array<P, 3> v = {seeds[s].second, seeds[s].second + P(h, 0), seeds[s].second + P(0, h)};
    std::array<double, 3> fv = {f(v[0]), f(v[1]), f(v[2])};
    for (int it = 0; it < 400; ++it, ++total_iters) {
      std::array<int, 3> idx = {0, 1, 2};
      std::sort(idx.begin(), idx.end(), [&](int x, int z) { return fv[x] < fv[z]; });
      const int lo = idx[0], mid = idx[1], hi = idx[2];
      if (std::abs(fv[hi] - fv[lo]) <= 1e-14 * (std::abs(fv[lo]) + 1e-300) &&
          (v[hi] - v[lo]).norm() < 1e-10)
        break;
      if ((v[hi] - v[lo]).norm() < 1e-12) break;
      const P centroid = 0.5 * (v[lo] + v[mid]);
      const P xr = centroid + (centroid - v[hi]);
      const double fr = f(xr);
      if (fr < fv[lo]) {
        const P xe = centroid + 2.0 * (centroid - v[hi]);
        const double fe = f(xe);
        if (fe < fr) { v[hi] = xe; fv[hi] = fe; } else { v[hi] = xr; fv[hi] = fr; }
      } else if (fr < fv[mid]) {
        v[hi] = xr;
        fv[hi] = fr;
      } else {
        const P xc = centroid + 0.5 * (v[hi] - centroid);
        const double fc = f(xc);
        if (fc < fv[hi]) {
          v[hi] = xc;
          fv[hi] = fc;
        } else {
          for (int q : {mid, hi}) {
            v[q] = v[lo] + 0.5 * (v[q] - v[lo]);
            fv[q] = f(v[q]);
          }
        }
      }
    }
    for (int q = 0; q < 3; ++q)
      if (fv[q] < best_val) {
        best_val = fv[q];
        best = v[q];
      }
  }

  BiexpFit fit;
  fit.t21 = std::exp(best(0));
  fit.t22 = std::exp(best(1));
  const Projected p = project_amplitudes(y, times, fit.t21, fit.t22);
  fit.c1 = p.c1;
  fit.c2 = p.c2;
  fit.residual = p.residual;
  fit.objective = best_val;
  fit.iterations = total_iters;
  return fit;
}

}  // namespace

BiexpFit nlls_tikhonov(const Vector& y, const Vector& times, const BiexpFitOptions& options) {
  if (y.size() != times.size()) throw InvalidArgument("nlls_tikhonov: y and times differ in length");
  require_finite(y, "nlls_tikhonov: y");
  if (options.lambda < 0.0) throw InvalidArgument("nlls_tikhonov: lambda must be >= 0");
  if (!(options.t_lo > 0.0 && options.t_hi > options.t_lo)) throw InvalidArgument("nlls_tikhonov: bad bounds");
  if (!(options.penalty_scale > 0.0)) throw InvalidArgument("nlls_tikhonov: penalty_scale must be positive");

  BiexpFit best;
  if (options.free_amplitudes) {
    best = fit_free(y, times, options);
  } else {
    const double lo = options.t_lo, span = options.t_hi - options.t_lo;
    std::vector<std::pair<double, double>> starts = {
        {lo + 0.2 * span, lo + 0.7 * span}, {lo + 0.7 * span, lo + 0.2 * span},
        {lo + 0.05 * span, lo + 0.4 * span}, {lo + 0.4 * span, lo + 0.05 * span}};
    Rng rng = substream(options.seed, 0);
    std::uniform_real_distribution<double> u(options.t_lo, options.t_hi);
    while (static_cast<int>(starts.size()) < options.multistart) starts.emplace_back(u(rng), u(rng));
    starts.resize(static_cast<std::size_t>(std::max(1, options.multistart)));
    best.objective = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : starts) {
      const BiexpFit f = lm_from(y, times, options, a, b);
      if (f.objective < best.objective) best = f;
    }
  }
  // Swapping the time constants only leaves the model unchanged when the amplitudes agree.
  if (best.t21 > best.t22 && (options.free_amplitudes || options.c1 == options.c2)) {
    std::swap(best.t21, best.t22);
    std::swap(best.c1, best.c2);
  }
  const double ss = (y.array() - y.mean()).square().sum();
  best.r2 = ss > 0.0 ? 1.0 - best.residual / ss : (best.residual == 0.0 ? 1.0 : 0.0);
  return best;
}

Vector biexp_fit_curve(const BiexpFit& fit, const Vector& times) {
  return biexp_signal(fit.c1, fit.c2, fit.t21, fit.t22, times);
}

}  // namespace descramble
