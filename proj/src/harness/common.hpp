#pragma once

// Helpers shared by the experiment drivers.

#include "descramble/descrambler.hpp"
#include "descramble/harness/report.hpp"
#include "descramble/harness/verification.hpp"
#include "descramble/signal_models.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace descramble::harness {

/// Q1 diag(s) Q2^T with Haar Q1, Q2 and log-spaced singular values s_i = ratio^-(i)
/// (largest 1). Neighbouring singular values differ by the fixed ratio, which
/// keeps every gap of W W^T proportionally bounded away from zero.
inline Matrix designed_matrix(Index rows, Index cols, double ratio, Rng& rng) {
  const Index r = std::min(rows, cols);
  const Matrix q1 = random_orthogonal(rows, rng);
  const Matrix q2 = random_orthogonal(cols, rng);
  Vector s(r);
  for (Index i = 0; i < r; ++i) s(i) = std::pow(ratio, -static_cast<double>(i));
  return q1.leftCols(r) * s.asDiagonal() * q2.leftCols(r).transpose();
}

/// Builds the first-layer matrix for the convergence experiments: "designed"
/// (fixed singular value ratio) or "gaussian" (iid entries), retried until admissible.
inline Matrix experiment_matrix(const std::string& kind, Index rows, Index cols, double ratio, std::uint64_t seed,
                                int* retries = nullptr) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng = substream(seed, static_cast<std::uint64_t>(attempt));
    Matrix w = kind == "gaussian" ? gaussian_matrix(rows, cols, rng) : designed_matrix(rows, cols, ratio, rng);
    if (is_admissible(w)) {
      if (retries) *retries = attempt;
      return w;
    }
  }
  throw std::runtime_error("could not draw an admissible matrix");
}

/// sum |a - b| / sum |b|
inline double rmae(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "rmae");
  const double denom = b.cwiseAbs().sum();
  return denom > 0.0 ? (a - b).cwiseAbs().sum() / denom : (a - b).cwiseAbs().sum();
}

inline double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Log-spaced grid of integers (duplicates removed).
inline std::vector<long long> log_grid(long long lo, long long hi, int points) {
  std::vector<long long> out;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    const auto v = static_cast<long long>(std::llround(std::pow(10.0, std::log10(double(lo)) * (1 - t) +
                                                                         std::log10(double(hi)) * t)));
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

inline StencilSpec stencil_from_config(const Config& cfg, const std::string& prefix, Index size) {
  StencilSpec s;
  s.kind = parse_stencil_kind(cfg.get_string(prefix + ".stencil", "fourier"));
  s.size = size;
  s.fd_order = static_cast<int>(cfg.get_int(prefix + ".fd_order", 1));
  s.fd_boundary = parse_fd_boundary(cfg.get_string(prefix + ".fd_boundary", "periodic"));
  return s;
}

/// Mean principal angle (radians) between the top-k right singular vectors of
/// w and the columns of basis.
inline double mean_angle_top_right(const Matrix& w, const Matrix& basis, Index k) {
  const EconSVD svd = econ_svd(w, 0.0);
  const Vector a = principal_angles(svd.v.leftCols(std::min(k, svd.rank())), basis);
  return a.mean();
}

}  // namespace descramble::harness
