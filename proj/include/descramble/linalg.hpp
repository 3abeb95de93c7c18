#pragma once

#include "descramble/matrix.hpp"
#include "descramble/rng.hpp"

#include <cstdint>

namespace descramble {

/// Relative cutoff below which singular values count as zero.
inline constexpr double kDefaultRankTol = 1e-10;

/// Economic rank-r SVD A = U diag(S) V^T.
///
/// Singular values are strictly positive and nonincreasing. In every column of
/// U the entry of largest magnitude (lowest index on ties) is nonnegative; the
/// matching column of V carries the same flip so the product is unchanged.
struct EconSVD {
  Matrix u;  // m x r
  Vector s;  // r
  Matrix v;  // n x r, empty when only left factors were requested
  Index rank() const { return s.size(); }
};

/// Eigenpairs of a symmetric matrix, values ascending, vectors orthonormal.
struct SymEig {
  Vector values;
  Matrix vectors;
};

enum class SvdFactors { kBoth, kLeftOnly };

/// Singular values <= tol * max(S) are dropped. A zero matrix yields rank 0.
EconSVD econ_svd(const Matrix& a, double tol = kDefaultRankTol,
                 SvdFactors factors = SvdFactors::kBoth);

/// All min(m, n) singular values, nonincreasing (zeros included).
Vector singular_values(const Matrix& a);

SymEig sym_eig_ascending(const Matrix& s);

/// Flip column signs of U so that diag(out^T Uref) >= 0.
Matrix sign_align(const Matrix& u, const Matrix& uref);

/// ||sign_align(U, Uref) - Uref||_F, in [0, 2 sqrt(r)].
double subspace_dist(const Matrix& u, const Matrix& uref);

/// Distinct, non-zero singular values, both judged relative to max(S).
bool is_admissible(const Matrix& a, double gap_tol = 1e-8);

/// Smallest gap between consecutive sorted eigenvalues of a symmetric matrix.
double eigengap(const Matrix& s);

/// Entrywise magnitude of the unitary 2-D DFT (Parseval holds exactly).
Matrix dft2_magnitude(const Matrix& a);

// Helpers shared by the descrambler, the harness and the tests.

/// In-place sign convention on columns of u; the same flips are applied to v if given.
void canonicalize_signs(Matrix& u, Matrix* v = nullptr);

/// Orthonormal basis of range(U)^perp by Gram-Schmidt of e_1, e_2, ... against U.
Matrix orthonormal_complement(const Matrix& u);

/// Haar-distributed orthogonal n x n matrix.
Matrix random_orthogonal(Index n, Rng& rng);

/// Matrix with iid standard normal entries.
Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);

/// Principal angles (radians, ascending) between the column spans of a and b.
Vector principal_angles(const Matrix& a, const Matrix& b);

/// Orthogonal Q maximizing tr(Q M) (Q = V U^T for M = U S V^T).
Matrix procrustes_maximizer(const Matrix& m);

/// ||P^T P - I||_F.
double orthogonality_defect(const Matrix& p);

/// Spectral norm.
double op_norm(const Matrix& a);

}  // namespace descramble
