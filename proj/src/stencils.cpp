#include "descramble/stencils.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace descramble {

StencilKind parse_stencil_kind(const std::string& s) {
  if (s == "fourier") return StencilKind::kFourier;
  if (s == "finite-difference" || s == "fd") return StencilKind::kFiniteDifference;
  throw InvalidArgument("unknown stencil kind '" + s + "'");
}

FdBoundary parse_fd_boundary(const std::string& s) {
  if (s == "periodic") return FdBoundary::kPeriodic;
  if (s == "one-sided") return FdBoundary::kOneSided;
  throw InvalidArgument("unknown finite-difference boundary '" + s + "'");
}

std::string to_string(StencilKind k) {
  return k == StencilKind::kFourier ? "fourier" : "finite-difference";
}

std::string to_string(FdBoundary b) { return b == FdBoundary::kPeriodic ? "periodic" : "one-sided"; }

Matrix fourier_diff_matrix(Index m) {
  if (m < 4 || m % 2 != 0) throw InvalidArgument("fourier_diff_matrix: m must be even and >= 4");
  const double h = 2.0 * std::numbers::pi / static_cast<double>(m);
  // Circulant: entry depends on (i - j) mod m only.
  std::vector<double> c(static_cast<std::size_t>(m), 0.0);
  for (Index k = 1; k < m; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    c[static_cast<std::size_t>(k)] = 0.5 * sign / std::tan(0.5 * static_cast<double>(k) * h);
  }
  Matrix d(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) d(i, j) = c[static_cast<std::size_t>(((i - j) % m + m) % m)];
  return d;
}

Matrix finite_diff_matrix(const StencilSpec& spec) {
  const Index m = spec.size;
  if (m < 2) throw InvalidArgument("finite_diff_matrix: m must be >= 2");
  if (spec.fd_order < 1 || spec.fd_order > 2)
    throw InvalidArgument("finite_diff_matrix: unsupported order " + std::to_string(spec.fd_order));
  const bool periodic = spec.fd_boundary == FdBoundary::kPeriodic;

  if (spec.fd_order == 1) {
    const Index rows = periodic ? m : m - 1;
    Matrix d = Matrix::Zero(rows, m);
    for (Index i = 0; i < rows; ++i) {
      d(i, i) -= 1.0;
      d(i, (i + 1) % m) += 1.0;
    }
    return d;
  }

  // Second order: x_{i+1} - 2 x_i + x_{i-1}.
  if (!periodic && m < 3) throw InvalidArgument("finite_diff_matrix: one-sided order 2 needs m >= 3");
  const Index rows = periodic ? m : m - 2;
  Matrix d = Matrix::Zero(rows, m);
  for (Index r = 0; r < rows; ++r) {
    const Index center = periodic ? r : r + 1;
    d(r, (center + m - 1) % m) += 1.0;
    d(r, center) -= 2.0;
    d(r, (center + 1) % m) += 1.0;
  }
  return d;
}

Matrix make_stencil(const StencilSpec& spec) {
  if (spec.kind == StencilKind::kFourier) return fourier_diff_matrix(spec.size);
  return finite_diff_matrix(spec);
}

Matrix trig_basis(Index m) {
  if (m < 2) throw InvalidArgument("trig_basis: m must be >= 2");
  Matrix t(m, m);
  const double md = static_cast<double>(m);
  for (Index k = 0; k < m; ++k) {
    const bool nyquist = (m % 2 == 0) && (k == m - 1);
    for (Index l = 0; l < m; ++l) {
      const double ld = static_cast<double>(l);
      double v;
      if (nyquist) {
        v = (l % 2 == 0) ? 1.0 : -1.0;
      } else if (k % 2 == 0) {
        v = std::cos(std::numbers::pi * ld * static_cast<double>(k) / md);
      } else {
        v = std::sin(std::numbers::pi * ld * static_cast<double>(k + 1) / md);
      }
      t(l, k) = v;
    }
    t.col(k).normalize();
  }
  return t;
}

double match_trig_basis(const Matrix& d, const Matrix& t) {
  if (d.cols() != t.rows() || t.rows() != t.cols())
    throw InvalidArgument("match_trig_basis: shape mismatch");
  const Matrix l = d.transpose() * d;
  Matrix m = t.transpose() * l * t;
  m.diagonal().setZero();
  const double denom = l.norm();
  return denom > 0.0 ? m.norm() / denom : m.norm();
}

SymEig smooth_basis_of(const Matrix& d) {
  const Matrix l = d.transpose() * d;
  SymEig eig = sym_eig_ascending(l);
  const Index m = l.rows();
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  const double tie_tol = 1e-8 * scale;

  // A single cluster means L = c I, where any basis is an eigenbasis: keep the canonical axes.
  if (eig.values(m - 1) - eig.values(0) <= tie_tol) {
    eig.vectors = Matrix::Identity(m, m);
    return eig;
  }

  Matrix refs;
  if (m >= 2 && match_trig_basis(d, trig_basis(m)) <= 1e-8) {
    refs = trig_basis(m);
  } else {
    refs = Matrix::Identity(m, m);
  }

  Index start = 0;
  while (start < m) {
    Index stop = start + 1;
    while (stop < m && eig.values(stop) - eig.values(stop - 1) <= tie_tol) ++stop;
    const Index size = stop - start;
    if (size > 1) {
      const Matrix block = eig.vectors.middleCols(start, size);
      Matrix canon(m, size);
      Index filled = 0;
      for (Index r = 0; r < refs.cols() && filled < size; ++r) {
        Vector x = block * (block.transpose() * refs.col(r));
        for (int pass = 0; pass < 2; ++pass) x -= canon.leftCols(filled) * (canon.leftCols(filled).transpose() * x);
        const double nrm = x.norm();
        if (nrm > 1e-6) canon.col(filled++) = x / nrm;
      }
      if (filled == size) {
        canonicalize_signs(canon);
        eig.vectors.middleCols(start, size) = canon;
      }
    }
    start = stop;
  }
  canonicalize_signs(eig.vectors);
  return eig;
}

}  // namespace descramble
