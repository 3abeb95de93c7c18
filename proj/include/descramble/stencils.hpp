#pragma once

#include "descramble/linalg.hpp"

#include <string>

namespace descramble {

enum class StencilKind { kFourier, kFiniteDifference };
enum class FdBoundary { kPeriodic, kOneSided };

struct StencilSpec {
  StencilKind kind = StencilKind::kFourier;
  Index size = 0;  // m, grid points
  int fd_order = 1;
  FdBoundary fd_boundary = FdBoundary::kPeriodic;
};

StencilKind parse_stencil_kind(const std::string& s);
FdBoundary parse_fd_boundary(const std::string& s);
std::string to_string(StencilKind k);
std::string to_string(FdBoundary b);

/// Periodic spectral differentiation matrix on m equispaced points (m even, m >= 4).
/// Entry (i, j) is 0.5 (-1)^(i-j) cot((i-j) h / 2), h = 2 pi / m.
Matrix fourier_diff_matrix(Index m);

/// Forward differences of order 1 or 2. Periodic stencils are m x m and wrap;
/// one-sided stencils drop the rows that would leave the grid.
Matrix finite_diff_matrix(const StencilSpec& spec);

/// Builds D for any spec.
Matrix make_stencil(const StencilSpec& spec);

/// Real trigonometric basis, unit columns, ordered by frequency with sine
/// before cosine at equal frequency. Column k samples cos(pi l k / m) for even k
/// and sin(pi l (k+1) / m) for odd k. For even m the last column would vanish
/// identically and is replaced by the alternating (Nyquist) vector.
Matrix trig_basis(Index m);

/// Eigendecomposition of D^T D, ascending. Eigenvalue clusters get a canonical
/// basis: projections of trig_basis columns (in column order) when the trig
/// basis diagonalizes D^T D, of e_1, e_2, ... otherwise.
SymEig smooth_basis_of(const Matrix& d);

/// ||offdiag(T^T D^T D T)||_F / ||D^T D||_F.
double match_trig_basis(const Matrix& d, const Matrix& t);

}  // namespace descramble
