#include "descramble/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace descramble {

void canonicalize_signs(Matrix& u, Matrix* v) {
  // Entries within a relative 1e-9 of the column maximum count as tied, so
  // rounding noise cannot move the pivot between equal-magnitude entries.
  for (Index j = 0; j < u.cols(); ++j) {
    if (u.rows() == 0) break;
    const double top = u.col(j).cwiseAbs().maxCoeff();
    Index best = 0;
    while (std::abs(u(best, j)) < top * (1.0 - 1e-9)) ++best;
    if (u(best, j) < 0.0) {
      u.col(j) = -u.col(j);
      if (v != nullptr && j < v->cols()) v->col(j) = -v->col(j);
    }
  }
}

EconSVD econ_svd(const Matrix& a, double tol, SvdFactors factors) {
  if (a.rows() < 1 || a.cols() < 1) throw InvalidArgument("econ_svd: empty matrix");
  require_finite(a, "econ_svd");
  if (tol < 0.0) throw InvalidArgument("econ_svd: negative tolerance");

  const bool want_v = factors == SvdFactors::kBoth;
  const unsigned options = want_v ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : static_cast<unsigned>(Eigen::ComputeThinU);
  Eigen::BDCSVD<Matrix> svd(a, options);
  const Vector& sv = svd.singularValues();

  const double smax = sv.size() ? sv(0) : 0.0;
  Index r = 0;
  if (smax > 0.0) {
    while (r < sv.size() && sv(r) > tol * smax && sv(r) > 0.0) ++r;
  }

  EconSVD out;
  out.s = sv.head(r);
  out.u = svd.matrixU().leftCols(r);
  if (want_v) {
    out.v = svd.matrixV().leftCols(r);
    canonicalize_signs(out.u, &out.v);
  } else {
    out.v.resize(0, 0);
    canonicalize_signs(out.u);
  }
  return out;
}

Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values");
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues();
}

namespace {

void require_symmetric(const Matrix& s, const char* what) {
  if (s.rows() != s.cols()) throw InvalidArgument(std::string(what) + ": matrix not square");
  require_finite(s, what);
  const double scale = s.norm();
  if ((s - s.transpose()).norm() > 1e-10 * scale)
    throw InvalidArgument(std::string(what) + ": matrix not symmetric");
}

}  // namespace

SymEig sym_eig_ascending(const Matrix& s) {
  require_symmetric(s, "sym_eig_ascending");
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw std::runtime_error("sym_eig_ascending: no convergence");
  SymEig out{es.eigenvalues(), es.eigenvectors()};
  canonicalize_signs(out.vectors);
  return out;
}

Matrix sign_align(const Matrix& u, const Matrix& uref) {
  require_same_shape(u, uref, "sign_align");
  Matrix out = u;
  for (Index j = 0; j < u.cols(); ++j) {
    if (out.col(j).dot(uref.col(j)) < 0.0) out.col(j) = -out.col(j);
  }
  return out;
}

double subspace_dist(const Matrix& u, const Matrix& uref) {
  return (sign_align(u, uref) - uref).norm();
}

bool is_admissible(const Matrix& a, double gap_tol) {
  if (a.size() == 0 || !a.allFinite()) return false;
  const Vector s = singular_values(a);
  const double smax = s(0);
  if (!(smax > 0.0)) return false;
  const double floor = gap_tol * smax;
  for (Index i = 0; i < s.size(); ++i) {
    if (!(s(i) > floor)) return false;
    if (i + 1 < s.size() && !(s(i) - s(i + 1) > floor)) return false;
  }
  return true;
}

double eigengap(const Matrix& s) {
  require_symmetric(s, "eigengap");
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (s + s.transpose()),
                                                          Eigen::EigenvaluesOnly)
                        .eigenvalues();
  double gap = std::numeric_limits<double>::infinity();
  for (Index i = 0; i + 1 < ev.size(); ++i) gap = std::min(gap, std::abs(ev(i + 1) - ev(i)));
  return gap;
}

Matrix dft2_magnitude(const Matrix& a) {
  require_finite(a, "dft2_magnitude");
  using Complex = std::complex<double>;
  using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
  auto dft = [](Index n) {
    CMatrix f(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Index p = 0; p < n; ++p) {
      for (Index j = 0; j < n; ++j) {
        // Reduce the phase index mod n so large grids keep full precision.
        const double phase = -2.0 * std::numbers::pi * static_cast<double>((p * j) % n) / n;
        f(p, j) = std::polar(scale, phase);
      }
    }
    return f;
  };
  const CMatrix fr = dft(a.rows());
  const CMatrix fc = dft(a.cols());
  const CMatrix out = fr * a.cast<Complex>() * fc.transpose();
  return out.cwiseAbs();
}

Matrix orthonormal_complement(const Matrix& u) {
  const Index m = u.rows();
  const Index want = m - u.cols();
  Matrix basis(m, u.cols() + std::max<Index>(want, 0));
  basis.leftCols(u.cols()) = u;
  Index filled = u.cols();
  for (Index e = 0; e < m && filled < m; ++e) {
    Vector x = Vector::Unit(m, e);
    // Two passes of classical Gram-Schmidt keep the result orthogonal to machine precision.
    for (int pass = 0; pass < 2; ++pass) {
      x -= basis.leftCols(filled) * (basis.leftCols(filled).transpose() * x);
    }
    const double nrm = x.norm();
    if (nrm > 1e-6) basis.col(filled++) = x / nrm;
  }
  if (filled != m) throw std::runtime_error("orthonormal_complement: input columns not orthonormal");
  return basis.rightCols(want);
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return g;
}

Matrix random_orthogonal(Index n, Rng& rng) {
  const Matrix g = gaussian_matrix(n, n, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidArgument("principal_angles: row mismatch");
  const Matrix qa = econ_svd(a, 1e-12, SvdFactors::kLeftOnly).u;
  const Matrix qb = econ_svd(b, 1e-12, SvdFactors::kLeftOnly).u;
  Vector cosines = singular_values(qa.transpose() * qb);
  Vector angles(cosines.size());
  for (Index i = 0; i < cosines.size(); ++i) angles(i) = std::acos(std::clamp(cosines(i), -1.0, 1.0));
  std::sort(angles.data(), angles.data() + angles.size());
  return angles;
}

Matrix procrustes_maximizer(const Matrix& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("procrustes_maximizer: matrix not square");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixV() * svd.matrixU().transpose();
}

double orthogonality_defect(const Matrix& p) {
  return (p.transpose() * p - Matrix::Identity(p.cols(), p.cols())).norm();
}

double op_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

}  // namespace descramble
