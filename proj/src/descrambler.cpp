#include "descramble/descrambler.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>

namespace descramble {

Method parse_method(const std::string& s) {
  if (s == "closed" || s == "closed_form") return Method::kClosedForm;
  if (s == "manifold") return Method::kManifold;
  if (s == "mds") return Method::kMds;
  if (s == "jacobian") return Method::kJacobian;
  throw InvalidArgument("unknown descrambling method '" + s + "'");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kClosedForm: return "closed_form";
    case Method::kManifold: return "manifold";
    case Method::kMds: return "mds";
    case Method::kJacobian: return "jacobian";
  }
  return "?";
}

namespace {

void check_conformable(const Matrix& d, const Matrix& a, const char* what) {
  if (d.cols() != a.rows())
    throw InvalidArgument(std::string(what) + ": stencil has " + std::to_string(d.cols()) + " columns, data has " +
                          std::to_string(a.rows()) + " rows");
  if (a.cols() < 1) throw InvalidArgument(std::string(what) + ": no samples");
  require_finite(a, what);
  require_finite(d, what);
}

double tie_tolerance(const Vector& values) { return 1e-8 * std::max(1.0, values.cwiseAbs().maxCoeff()); }

// Orthogonal factor of a QR decomposition with a positive R diagonal.
Matrix qr_retract(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace

double eta_smoothness(const Matrix& d, const Matrix& p, const Matrix& a) {
  if (p.rows() != d.cols() || p.cols() != a.rows())
    throw InvalidArgument("eta_smoothness: shapes of D, P and A are not conformable");
  if (a.cols() < 1) throw InvalidArgument("eta_smoothness: no samples");
  return (d * (p * a)).squaredNorm() / static_cast<double>(a.cols());
}

DescrambleReport descramble_closed(const Matrix& d, const Matrix& a, double gap_tol) {
  check_conformable(d, a, "descramble_closed");
  if (a.squaredNorm() == 0.0) throw InvalidArgument("descramble_closed: data matrix is zero");
  const Index m = a.rows();
  const Matrix s = a / std::sqrt(static_cast<double>(a.cols()));
  const EconSVD svd = econ_svd(s, kDefaultRankTol, SvdFactors::kLeftOnly);
  const SymEig smooth = smooth_basis_of(d);
  const Index r = std::min(svd.rank(), m);

  const Matrix ur = svd.u.leftCols(r);
  Matrix p = smooth.vectors.leftCols(r) * ur.transpose();
  if (r < m) p += smooth.vectors.rightCols(m - r) * orthonormal_complement(ur).transpose();

  DescrambleReport rep;
  rep.p = p;
  rep.method = Method::kClosedForm;
  rep.rank_used = r;
  rep.objective = eta_smoothness(d, p, a);
  bool ties = false;
  const double tt = tie_tolerance(smooth.values);
  for (Index i = 0; i + 1 < m && i < r; ++i)
    if (smooth.values(i + 1) - smooth.values(i) <= tt) ties = true;
  rep.diagnostics.degenerate = ties || !is_admissible(s, gap_tol);
  rep.diagnostics.starts = 1;
  return rep;
}

DescrambleReport descramble_manifold(const Matrix& d, const Matrix& a, const ManifoldOptions& options) {
  check_conformable(d, a, "descramble_manifold");
  if (options.max_iters < 0 || options.restarts < 0) throw InvalidArgument("descramble_manifold: bad options");
  const Index m = a.rows();
  const double n = static_cast<double>(a.cols());
  const Matrix l = d.transpose() * d;
  const Matrix c = a * a.transpose() / n;
  const double tol = options.tol >= 0.0 ? options.tol : 1e-9 * a.squaredNorm() / n;
  const double armijo = 1e-4;

  auto objective = [&](const Matrix& p) { return (p.transpose() * l * p * c).trace(); };
  // Euclidean gradient 2 L P C, projected: P skew(P^T G) = (G - P G^T P) / 2.
  auto riemannian_grad = [&](const Matrix& p) {
    const Matrix g = 2.0 * l * p * c;
    return Matrix(0.5 * (g - p * g.transpose() * p));
  };

  DescrambleReport best;
  best.objective = std::numeric_limits<double>::infinity();
  Rng rng = substream(options.seed, 0x6d616e);
  const double scale = std::max(l.norm() * c.norm(), 1e-300);

  for (int start = 0; start <= options.restarts; ++start) {
    Matrix p = start == 0 ? Matrix::Identity(m, m) : random_orthogonal(m, rng);
    double f = objective(p);
    Matrix grad = riemannian_grad(p);
    double gnorm = grad.norm();
    double tau = 1.0 / scale;
    Matrix prev_p, prev_grad;
    bool stalled = false;
    int it = 0;
    for (; it < options.max_iters && gnorm > tol; ++it) {
      if (it > 0) {
        // Barzilai-Borwein step from the last displacement.
        const Matrix sdiff = p - prev_p;
        const Matrix ydiff = grad - prev_grad;
        const double sy = std::abs((sdiff.array() * ydiff.array()).sum());
        if (sy > 0.0) tau = sdiff.squaredNorm() / sy;
        tau = std::clamp(tau, 1e-6 / scale, 1e6 / scale);
      }
      const double slope = gnorm * gnorm;
      bool accepted = false;
      Matrix trial;
      double ftrial = f;
      for (int bt = 0; bt < 60; ++bt) {
        trial = qr_retract(p - tau * grad);
        ftrial = objective(trial);
        if (ftrial <= f - armijo * tau * slope) {
          accepted = true;
          break;
        }
        tau *= 0.5;
      }
      if (!accepted) {
        stalled = true;
        break;
      }
      prev_p = p;
      prev_grad = grad;
      p = trial;
      f = ftrial;
      grad = riemannian_grad(p);
      gnorm = grad.norm();
    }
    if (f < best.objective) {
      best.p = p;
      best.objective = f;
      best.diagnostics.iterations = it;
      best.diagnostics.grad_norm = gnorm;
      best.diagnostics.stalled = stalled && gnorm > tol;
    }
  }
  best.method = Method::kManifold;
  best.rank_used = m;
  best.diagnostics.starts = options.restarts + 1;
  best.objective = eta_smoothness(d, best.p, a);
  return best;
}

DescrambleReport descramble_layer(const FeedForwardNet& net, Index k, const Matrix& x, const Matrix& d, Method method,
                                  const ManifoldOptions& options) {
  const Matrix a = layer_output(net, k, x);
  switch (method) {
    case Method::kClosedForm: return descramble_closed(d, a);
    case Method::kManifold: return descramble_manifold(d, a, options);
    default: throw InvalidArgument("descramble_layer: method must be closed_form or manifold");
  }
}

Matrix linearized_tap(const FeedForwardNet& net, Index k, const Matrix& x) {
  if (x.cols() < 1) throw InvalidArgument("linearized_tap: no samples");
  const Vector xbar = x.rowwise().mean();
  const Vector f0 = layer_output(net, k, xbar);
  const Matrix j = jacobian_at(net, k, xbar);
  Matrix a = j * (x.colwise() - xbar);
  a.colwise() += f0;
  return a;
}

DescrambleReport descramble_jacobian(const FeedForwardNet& net, Index k, const Matrix& x, const Matrix& d,
                                     Method method, const ManifoldOptions& options) {
  const Matrix a = linearized_tap(net, k, x);
  DescrambleReport rep;
  switch (method) {
    case Method::kClosedForm: rep = descramble_closed(d, a); break;
    case Method::kManifold: rep = descramble_manifold(d, a, options); break;
    default: throw InvalidArgument("descramble_jacobian: method must be closed_form or manifold");
  }
  rep.method = Method::kJacobian;
  return rep;
}

DescrambleReport mds_descrambler(const Matrix& w) {
  if (w.rows() != w.cols() || w.rows() < 1) throw InvalidArgument("mds_descrambler: W must be square");
  require_finite(w, "mds_descrambler");
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  DescrambleReport rep;
  rep.p = svd.matrixV() * svd.matrixU().transpose();
  rep.objective = (rep.p * w).trace();
  rep.method = Method::kMds;
  rep.rank_used = w.rows();
  rep.diagnostics.degenerate = !is_admissible(w);
  rep.diagnostics.starts = 1;
  return rep;
}

TheoryLimit theory_limit_noise(const Matrix& w, const Matrix& d) {
  if (d.cols() != w.rows()) throw InvalidArgument("theory_limit_noise: stencil and W disagree in size");
  const EconSVD svd = econ_svd(w);
  if (svd.rank() == 0) throw InvalidArgument("theory_limit_noise: W is zero");
  const SymEig smooth = smooth_basis_of(d);
  const Index m = w.rows();
  const Index r = svd.rank();
  TheoryLimit lim;
  lim.t_r = smooth.vectors.leftCols(r);
  lim.u = svd.u;
  lim.p_limit = lim.t_r * svd.u.transpose();
  lim.p_completed = lim.p_limit;
  if (r < m) lim.p_completed += smooth.vectors.rightCols(m - r) * orthonormal_complement(svd.u).transpose();
  lim.descrambled_w = lim.t_r * svd.s.asDiagonal() * svd.v.transpose();
  lim.eigengap = eigengap(w * w.transpose());
  return lim;
}

TheoryLimit theory_limit_sigma(const Matrix& w, const Matrix& d, const Matrix& e_sst, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("theory_limit_sigma: sigma must be positive");
  if (e_sst.rows() != w.cols() || e_sst.cols() != w.cols())
    throw InvalidArgument("theory_limit_sigma: E[ss^T] must be square with W's column count");
  TheoryLimit lim = theory_limit_noise(w, d);
  lim.sigma = sigma;
  const Index r = lim.u.cols();
  const Index n = w.cols();
  const Matrix sig = w * (e_sst + sigma * sigma * Matrix::Identity(n, n)) * w.transpose();
  const SymEig eig = sym_eig_ascending(sig);
  // Descending eigenvalue order pairs with descending singular values.
  Matrix us(w.rows(), r);
  for (Index i = 0; i < r; ++i) us.col(i) = eig.vectors.col(eig.vectors.cols() - 1 - i);
  const Matrix aligned = sign_align(us, lim.u);
  lim.dist_fro = (aligned - lim.u).norm();
  lim.dist_op = op_norm(aligned - lim.u);
  lim.u = aligned;
  lim.p_limit = lim.t_r * aligned.transpose();
  if (lim.eigengap > 0.0) {
    lim.bound = std::pow(2.0, 1.5) / (sigma * sigma) * op_norm(w * e_sst * w.transpose()) / lim.eigengap;
  }
  return lim;
}

Matrix rescale_homomorphism(const Matrix& p, const Matrix& t_r, const Matrix& u) {
  if (p.rows() != t_r.rows() || p.cols() != u.rows() || t_r.cols() != u.cols())
    throw InvalidArgument("rescale_homomorphism: shape mismatch");
  return t_r.transpose() * p * u;
}

Matrix align_within_smooth_ties(const Matrix& p, const Matrix& d, const Matrix& target, double tie_tol) {
  require_same_shape(p, target, "align_within_smooth_ties");
  if (d.cols() != p.rows()) throw InvalidArgument("align_within_smooth_ties: stencil size mismatch");
  const SymEig smooth = smooth_basis_of(d);
  const Index m = p.rows();
  const double tt = tie_tol * std::max(1.0, smooth.values.cwiseAbs().maxCoeff());
  Matrix rot = Matrix::Identity(m, m);
  Index start = 0;
  while (start < m) {
    Index stop = start + 1;
    while (stop < m && smooth.values(stop) - smooth.values(stop - 1) <= tt) ++stop;
    if (stop - start > 1) {
      const Matrix tc = smooth.vectors.middleCols(start, stop - start);
      const Matrix q = procrustes_maximizer(tc.transpose() * p * target.transpose() * tc);
      rot += tc * (q - Matrix::Identity(q.rows(), q.cols())) * tc.transpose();
    }
    start = stop;
  }
  return rot * p;
}

void write_report(const DescrambleReport& report, const std::filesystem::path& dir, const Matrix* w) {
  std::filesystem::create_directories(dir);
  write_matrix_bin(report.p, dir / "P.bin");
  nlohmann::json j;
  j["method"] = to_string(report.method);
  j["objective"] = report.objective;
  j["rank_used"] = report.rank_used;
  j["orthogonality_defect"] = orthogonality_defect(report.p);
  j["diagnostics"] = {{"iterations", report.diagnostics.iterations},
                      {"grad_norm", report.diagnostics.grad_norm},
                      {"alignment_applied", report.diagnostics.alignment_applied},
                      {"degenerate", report.diagnostics.degenerate},
                      {"stalled", report.diagnostics.stalled},
                      {"starts", report.diagnostics.starts}};
  if (w != nullptr) {
    if (w->rows() != report.p.cols()) throw InvalidArgument("write_report: W rows do not match P");
    const Matrix pw = report.p * *w;
    write_matrix_bin(pw, dir / "descrambled_W.bin");
    write_matrix_csv(dft2_magnitude(pw), dir / "fourier_view.csv");
    j["descrambled_w"] = "descrambled_W.bin";
    j["fourier_view"] = "fourier_view.csv";
  }
  std::ofstream out(dir / "report.json");
  if (!out) throw FormatError("write_report: cannot write " + (dir / "report.json").string());
  out << j.dump(2) << '\n';
}

}  // namespace descramble
