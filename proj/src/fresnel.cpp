#include "descramble/fresnel.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace descramble {

namespace {

// Below this the alternating Maclaurin series is used; above it the
// continued fraction for the complementary error function converges fast.
constexpr double kSeriesLimit = 2.0;
constexpr int kMaxIter = 200;
constexpr double kEps = 1e-16;

FresnelPair maclaurin(double x) {
  // C(x) = sum (-1)^n x^(4n+1) / ((2n)! (4n+1)),  S(x) = sum (-1)^n x^(4n+3) / ((2n+1)! (4n+3))
  const double x2 = x * x;
  double c = 0.0, s = 0.0;
  double pc = x;       // x^(4n+1) / (2n)!
  double ps = x * x2;  // x^(4n+3) / (2n+1)!
  for (int n = 0; n < kMaxIter; ++n) {
    const double sign = (n % 2 == 0) ? 1.0 : -1.0;
    const double tc = pc / (4.0 * n + 1.0);
    const double ts = ps / (4.0 * n + 3.0);
    c += sign * tc;
    s += sign * ts;
    if (tc < kEps * std::abs(c) && ts < kEps * std::max(std::abs(s), 1e-300)) break;
    pc *= x2 * x2 / ((2.0 * n + 1.0) * (2.0 * n + 2.0));
    ps *= x2 * x2 / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
  }
  return {c, s};
}

// Lentz continued fraction in the normalized variable z, where
// C1(z) = integral_0^z cos(pi t^2 / 2) dt.
FresnelPair continued_fraction_normalized(double z) {
  using Complex = std::complex<double>;
  const double tiny = std::numeric_limits<double>::min() * 1e10;
  const double pix2 = std::numbers::pi * z * z;
  Complex b(1.0, -pix2);
  Complex cc(1.0 / tiny, 0.0);
  Complex d = 1.0 / b;
  Complex h = d;
  double n = -1.0;
  int k = 2;
  for (; k <= kMaxIter; ++k) {
    n += 2.0;
    const double a = -n * (n + 1.0);
    b += 4.0;
    d = 1.0 / (a * d + b);
    cc = b + a / cc;
    const Complex del = cc * d;
    h *= del;
    if (std::abs(del.real() - 1.0) + std::abs(del.imag()) < kEps) break;
  }
  if (k > kMaxIter) throw std::runtime_error("fresnel: continued fraction did not converge");
  h *= Complex(z, -z);
  const Complex cs = Complex(0.5, 0.5) * (1.0 - Complex(std::cos(0.5 * pix2), std::sin(0.5 * pix2)) * h);
  return {cs.real(), cs.imag()};
}

}  // namespace

FresnelPair fresnel(double x) {
  const double ax = std::abs(x);
  FresnelPair r;
  if (ax <= kSeriesLimit) {
    r = maclaurin(ax);
  } else {
    const double scale = std::sqrt(std::numbers::pi / 2.0);
    const FresnelPair n = continued_fraction_normalized(ax / scale);
    r = {scale * n.c, scale * n.s};
  }
  if (x < 0.0) {
    r.c = -r.c;
    r.s = -r.s;
  }
  return r;
}

double fresnel_c(double x) { return fresnel(x).c; }

double fresnel_s(double x) { return fresnel(x).s; }

}  // namespace descramble
