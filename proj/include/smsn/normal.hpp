#pragma once

#include <cmath>

namespace smsn {

inline constexpr double sqrt_2pi = 2.5066282746310002;
inline constexpr double log_2pi = 1.8378770664093453;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / sqrt_2pi; }

inline double norm_logpdf(double x) { return -0.5 * (x * x + log_2pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

namespace detail {

// Mills ratio Phi(x)/phi(x) for x << 0 via the Laplace continued fraction
// 1/(t + 1/(t + 2/(t + 3/(...)))), t = -x. Accurate to machine eps for t > 10.
inline double mills_cf(double x) {
  const double t = -x;
  double cf = 0.0;
  for (int k = 24; k >= 1; --k) cf = k / (t + cf);
  return 1.0 / (t + cf);
}

}  // namespace detail

// phi(x)/Phi(x); Phi underflows below ~ -38, switch to the continued fraction.
inline double mills_inv(double x) {
  if (x < -37.0) return 1.0 / detail::mills_cf(x);
  return norm_pdf(x) / norm_cdf(x);
}

inline double norm_logcdf(double x) {
  if (x < -37.0) return norm_logpdf(x) + std::log(detail::mills_cf(x));
  if (x > 8.0) return -norm_cdf(-x);  // log(1-e) ~ -e
  return std::log(norm_cdf(x));
}

// Acklam-style rational approximation refined by one Halley step.
inline double norm_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double u = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (p <= 1.0 - plow) {
    double u = p - 0.5, r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double u = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  double e = norm_cdf(x) - p;
  double u = e * sqrt_2pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace smsn
