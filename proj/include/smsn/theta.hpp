#pragma once

#include "smsn/dist.hpp"
#include "smsn/families.hpp"
#include "smsn/linalg.hpp"

namespace smsn {

// Full parameter vector (beta, sigma2_e, D^{1/2}, lambda, family/nu) plus the
// derived quantities used everywhere in the EM machinery.
struct Theta {
  Vec beta;
  double sigma2_e = 1.0;
  Mat dhalf;    // symmetric square root of D, q x q
  Vec lambda;   // q
  MixingFamily family;

  int p() const { return static_cast<int>(beta.size()); }
  int q() const { return static_cast<int>(lambda.size()); }

  struct Derived {
    Mat D;
    Vec delta;
    Vec Delta;
    Mat Gamma;
    Vec zeta;   // D^{-1/2} lambda
    double k1;
    double c;   // -sqrt(2/pi) k1
  };

  Derived derived() const {
    Derived d;
    d.D = dhalf * dhalf;
    d.delta = lambda / std::sqrt(1.0 + lambda.squaredNorm());
    d.Delta = dhalf * d.delta;
    d.Gamma = d.D - d.Delta * d.Delta.transpose();
    d.zeta = dhalf.ldlt().solve(lambda);
    auto kc = k1_and_c(family);
    d.k1 = kc.first;
    d.c = kc.second;
    return d;
  }

  void validate() const {
    family.validate();
    if (!(sigma2_e > 0.0)) throw std::invalid_argument("sigma2_e must be positive");
    if (dhalf.rows() != q() || dhalf.cols() != q())
      throw std::invalid_argument("dhalf dimension mismatch");
    if (!dhalf.isApprox(dhalf.transpose(), 1e-8))
      throw std::invalid_argument("dhalf must be symmetric");
    Eigen::LLT<Mat> llt(dhalf * dhalf);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("D must be positive definite");
    Derived d = derived();
    Eigen::LLT<Mat> lg(d.Gamma);
    if (lg.info() != Eigen::Success)
      throw std::invalid_argument("Gamma = D - Delta Delta' must be positive definite");
  }

  // flat layout (beta, sigma2_e, vech dhalf, lambda, nu) for traces and reports
  Vec flatten() const {
    const int qq = q();
    Vec out(p() + 1 + qq * (qq + 1) / 2 + qq + family.nu_dim());
    int k = 0;
    for (int i = 0; i < p(); ++i) out[k++] = beta[i];
    out[k++] = sigma2_e;
    for (int i = 0; i < qq; ++i)
      for (int j = 0; j <= i; ++j) out[k++] = dhalf(i, j);
    for (int i = 0; i < qq; ++i) out[k++] = lambda[i];
    for (int i = 0; i < family.nu_dim(); ++i) out[k++] = family.nu[i];
    return out;
  }
};

}  // namespace smsn
