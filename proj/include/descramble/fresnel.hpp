#pragma once

namespace descramble {

/// C(x) = integral_0^x cos(t^2) dt. Odd in x.
double fresnel_c(double x);

/// S(x) = integral_0^x sin(t^2) dt. Odd in x.
double fresnel_s(double x);

struct FresnelPair {
  double c;
  double s;
};

/// Both integrals at once; cheaper than two separate calls.
FresnelPair fresnel(double x);

}  // namespace descramble
