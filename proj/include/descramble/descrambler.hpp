#pragma once

#include "descramble/linalg.hpp"
#include "descramble/network.hpp"
#include "descramble/stencils.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace descramble {

enum class Method { kClosedForm, kManifold, kMds, kJacobian };

Method parse_method(const std::string& s);
std::string to_string(Method m);

struct DescrambleDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;          // final Riemannian gradient norm (manifold solver)
  bool alignment_applied = false;  // tie-cluster rotation applied after solving
  bool degenerate = false;         // S inadmissible, or D^T D ties inside the paired block
  bool stalled = false;            // line search failed before reaching tolerance
  int starts = 0;
};

struct DescrambleReport {
  Matrix p;  // orthogonal n x n
  double objective = 0.0;
  Method method = Method::kClosedForm;
  Index rank_used = 0;
  DescrambleDiagnostics diagnostics;
};

/// ||D P A||_F^2 / N with N = cols(A). P need not be orthogonal.
double eta_smoothness(const Matrix& d, const Matrix& p, const Matrix& a);

/// Exact minimizer of eta over O(n): with S = A / sqrt(N) = U Sigma V^T and
/// T the ascending eigenbasis of D^T D, P = T_R U_R^T + T_rest U_c^T where U_c
/// is the Gram-Schmidt complement of range(U_R) seeded with e_1, e_2, ...
DescrambleReport descramble_closed(const Matrix& d, const Matrix& a, double gap_tol = 1e-8);

struct ManifoldOptions {
  int max_iters = 5000;
  double tol = -1.0;  // negative: 1e-9 ||A||_F^2 / N
  int restarts = 2;   // random Haar starts in addition to the identity
  std::uint64_t seed = 0;
};

/// Riemannian gradient descent on O(n) with QR retraction and Armijo
/// backtracking. Returns the best of the identity start and the random starts.
DescrambleReport descramble_manifold(const Matrix& d, const Matrix& a, const ManifoldOptions& options = {});

/// Descrambles the pre-activation tap f_k(X).
DescrambleReport descramble_layer(const FeedForwardNet& net, Index k, const Matrix& x, const Matrix& d,
                                  Method method, const ManifoldOptions& options = {});

/// Columns f_k(xbar) + J (x_i - xbar), with xbar the column mean of X.
Matrix linearized_tap(const FeedForwardNet& net, Index k, const Matrix& x);

/// Descrambles the linearized tap; the report is tagged kJacobian.
DescrambleReport descramble_jacobian(const FeedForwardNet& net, Index k, const Matrix& x, const Matrix& d,
                                     Method method = Method::kClosedForm, const ManifoldOptions& options = {});

/// argmax_P tr(P W) = V U^T for W = U Sigma V^T; objective = sum of singular values.
DescrambleReport mds_descrambler(const Matrix& w);

struct TheoryLimit {
  Matrix p_limit;        // T_r U_1^T
  Matrix p_completed;    // p_limit plus the deterministic completion, orthogonal
  Matrix t_r;            // m x r
  Matrix u;              // U_1, or U(sigma) for the sigma limit
  Matrix descrambled_w;  // T_r Sigma_1 V_1^T
  std::optional<double> sigma;
  std::optional<double> bound;  // unset when the eigengap of W W^T is zero
  double dist_op = 0.0;         // ||sign_align(U(sigma), U_1) - U_1||_2
  double dist_fro = 0.0;        // same in Frobenius norm
  double eigengap = 0.0;
};

/// Large-N limit for isotropic data.
TheoryLimit theory_limit_noise(const Matrix& w, const Matrix& d);

/// Top-r eigenvectors of W (E + sigma^2 I) W^T against U_1, with the bound
/// 2^(3/2) sigma^-2 ||W E W^T||_2 / eigengap(W W^T).
TheoryLimit theory_limit_sigma(const Matrix& w, const Matrix& d, const Matrix& e_sst, double sigma);

/// phi(P) = T_r^T P U.
Matrix rescale_homomorphism(const Matrix& p, const Matrix& t_r, const Matrix& u);

/// Rotates P inside each eigenvalue cluster of D^T D (which leaves eta
/// unchanged) to bring it as close as possible to target, in the sense of
/// maximizing tr(R P target^T). Returns R P.
Matrix align_within_smooth_ties(const Matrix& p, const Matrix& d, const Matrix& target, double tie_tol = 1e-8);

/// Writes P.bin and report.json, plus descrambled_W.bin and fourier_view.csv
/// (|DFT2(P W)|) when w is given.
void write_report(const DescrambleReport& report, const std::filesystem::path& dir, const Matrix* w = nullptr);

}  // namespace descramble
