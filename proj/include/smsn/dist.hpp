#pragma once

#include <cstdint>
#include <utility>

#include "smsn/families.hpp"
#include "smsn/linalg.hpp"

namespace smsn {

struct SmsnParams {
  Vec mu;
  Mat sigma;
  Vec lambda;
  MixingFamily family;

  int dim() const { return static_cast<int>(mu.size()); }
  void validate() const;
};

// Conditional mixing-scale expectations given an observation:
//   u_hat    = E{U | y}
//   tau1     = E{U^{1/2}  W_Phi(U^{1/2} A) | y}
//   tau_neg1 = E{U^{-1/2} W_Phi(U^{1/2} A) | y}
// with W_Phi(x) = phi(x)/Phi(x).
struct MixingMoments {
  double u_hat;
  double tau1;
  double tau_neg1;
};

struct DeltaGamma {
  Vec delta;   // lambda / sqrt(1 + lambda'lambda)
  Vec Delta;   // D^{1/2} delta  (symmetric root)
  Mat Gamma;   // D - Delta Delta'
};

double sn_logpdf(const Vec& y, const SmsnParams& params);
double smsn_logpdf(const Vec& y, const SmsnParams& params);

// Density core on precomputed invariants: d = Mahalanobis distance against
// the dispersion matrix, logdet its log-determinant, A the skewness argument
// lambda' Sigma^{-1/2} (y - mu).
double smsn_logpdf_core(double d, double logdet, int p, double A,
                        const MixingFamily& family);

DeltaGamma delta_gamma(const Mat& D, const Vec& lambda);

// Draws via Y = mu + U^{-1/2} Sigma^{1/2} (delta|T0| + (I - delta delta')^{1/2} T1).
// Rows of the result are draws; deterministic given seed.
Mat sample_smsn(int n, const SmsnParams& params, std::uint64_t seed);

MixingMoments mixing_expectations(const MixingFamily& family, const Vec& resid,
                                  const Mat& psi, double A);
// Same, with d = resid' psi^{-1} resid and p already computed.
MixingMoments mixing_expectations_core(const MixingFamily& family, double d, int p,
                                       double A);

}  // namespace smsn
