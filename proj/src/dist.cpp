#include "smsn/dist.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "smsn/normal.hpp"
#include "smsn/quadrature.hpp"

namespace smsn {

namespace {

double lgam(double x) { return std::lgamma(x); }

double t_logcdf(double x, double nu) {
  boost::math::students_t_distribution<double> dist(nu);
  double c = boost::math::cdf(dist, x);
  if (c > 0.0) return std::log(c);
  // far left tail: T(x;nu) ~ C(nu) |x|^{-nu}
  double logC = lgam((nu + 1.0) / 2.0) - lgam(nu / 2.0) + (nu / 2.0 - 1.0) * std::log(nu) -
                0.5 * std::log(M_PI);
  return logC - nu * std::log(-x);
}

double t_cdf(double x, double nu) {
  boost::math::students_t_distribution<double> dist(nu);
  return boost::math::cdf(dist, x);
}

// log pdf of the p-variate Student-t at Mahalanobis distance d
double mvt_logpdf(double d, double logdet, int p, double nu) {
  return lgam((nu + p) / 2.0) - lgam(nu / 2.0) - 0.5 * p * std::log(nu * M_PI) -
         0.5 * logdet - 0.5 * (nu + p) * std::log1p(d / nu);
}

double logsumexp2(double a, double b) {
  double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

std::pair<double, double> k1_and_c(const MixingFamily& family) {
  family.validate();
  double k1;
  switch (family.tag) {
    case Family::normal:
    case Family::skew_normal:
      k1 = 1.0;
      break;
    case Family::skew_t: {
      const double nu = family.nu[0];
      if (nu <= 1.0)
        throw std::domain_error("k1 infinite for skew-t with nu = " + std::to_string(nu) +
                                " (needs nu > 1)");
      k1 = std::sqrt(nu / 2.0) * std::exp(lgam((nu - 1.0) / 2.0) - lgam(nu / 2.0));
      break;
    }
    case Family::skew_slash: {
      const double nu = family.nu[0];
      if (nu <= 0.5)
        throw std::domain_error("k1 infinite for skew-slash with nu = " +
                                std::to_string(nu) + " (needs nu > 1/2)");
      k1 = nu / (nu - 0.5);
      break;
    }
    case Family::skew_cont_normal:
      k1 = family.nu[0] / std::sqrt(family.nu[1]) + (1.0 - family.nu[0]);
      break;
    default:
      k1 = 1.0;
  }
  return {k1, -std::sqrt(2.0 / M_PI) * k1};
}

void SmsnParams::validate() const {
  family.validate();
  const int p = dim();
  if (sigma.rows() != p || sigma.cols() != p)
    throw std::invalid_argument("sigma dimension mismatch");
  if (lambda.size() != p) throw std::invalid_argument("lambda dimension mismatch");
  if (!mu.allFinite() || !sigma.allFinite() || !lambda.allFinite())
    throw std::invalid_argument("non-finite parameter entries");
  if (!sigma.isApprox(sigma.transpose(), 1e-10))
    throw std::invalid_argument("sigma must be symmetric");
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sigma must be positive definite");
}

double smsn_logpdf_core(double d, double logdet, int p, double A,
                        const MixingFamily& family) {
  const double log_norm = -0.5 * (p * log_2pi + logdet + d);
  switch (family.tag) {
    case Family::normal:
    case Family::skew_normal:
      return M_LN2 + log_norm + norm_logcdf(A);
    case Family::skew_t: {
      const double nu = family.nu[0];
      return M_LN2 + mvt_logpdf(d, logdet, p, nu) +
             t_logcdf(A * std::sqrt((nu + p) / (nu + d)), nu + p);
    }
    case Family::skew_cont_normal: {
      const double nu1 = family.nu[0], nu2 = family.nu[1];
      // component at u = nu2: phi_p(y; mu, nu2^{-1} Sigma) = nu2^{p/2} e^{-nu2 d / 2} * base
      double l1 = (nu1 > 0.0 ? std::log(nu1) - 0.5 * (p * log_2pi + logdet - p * std::log(nu2) + nu2 * d) +
                                   norm_logcdf(std::sqrt(nu2) * A)
                             : -std::numeric_limits<double>::infinity());
      double l2 = std::log1p(-nu1) + log_norm + norm_logcdf(A);
      return M_LN2 + logsumexp2(l1, l2);
    }
    case Family::skew_slash: {
      const double nu = family.nu[0];
      const double a = nu + 0.5 * p;
      auto f = [&](double u) {
        return std::pow(u, a - 1.0) * std::exp(-0.5 * u * d) *
               norm_cdf(std::sqrt(u) * A);
      };
      double I = integrate(f, 0.0, 1.0, 1e-300, 1e-10, 200);
      if (!(I > 0.0)) throw numeric_error("skew-slash density integral vanished");
      return M_LN2 + std::log(nu) - 0.5 * (p * log_2pi + logdet) + std::log(I);
    }
  }
  throw std::logic_error("unknown family");
}

namespace {

// d, logdet and skewness argument A = lambda' Sigma^{-1/2}(y - mu)
struct Prepared {
  double d, logdet, A;
};

Prepared prepare(const Vec& y, const SmsnParams& params) {
  params.validate();
  if (y.size() != params.dim()) throw std::invalid_argument("y dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Mat> es(params.sigma);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("sigma must be positive definite");
  const Vec ev = es.eigenvalues();
  const Mat inv_sqrt =
      es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  const Vec y0 = inv_sqrt * (y - params.mu);
  return {y0.squaredNorm(), ev.array().log().sum(), params.lambda.dot(y0)};
}

}  // namespace

double sn_logpdf(const Vec& y, const SmsnParams& params) {
  Prepared pr = prepare(y, params);
  return M_LN2 - 0.5 * (params.dim() * log_2pi + pr.logdet + pr.d) + norm_logcdf(pr.A);
}

double smsn_logpdf(const Vec& y, const SmsnParams& params) {
  Prepared pr = prepare(y, params);
  return smsn_logpdf_core(pr.d, pr.logdet, params.dim(), pr.A, params.family);
}

DeltaGamma delta_gamma(const Mat& D, const Vec& lambda) {
  if (D.rows() != lambda.size()) throw std::invalid_argument("D/lambda size mismatch");
  DeltaGamma out;
  out.delta = lambda / std::sqrt(1.0 + lambda.squaredNorm());
  out.Delta = sym_sqrt(D) * out.delta;
  out.Gamma = D - out.Delta * out.Delta.transpose();
  return out;
}

Mat sample_smsn(int n, const SmsnParams& params, std::uint64_t seed) {
  params.validate();
  const int p = params.dim();
  const Vec delta = params.lambda / std::sqrt(1.0 + params.lambda.squaredNorm());
  const Mat sig_half = sym_sqrt(params.sigma);
  const Mat resid_half = sym_sqrt(Mat::Identity(p, p) - delta * delta.transpose());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat out(n, p);
  Vec t1(p);
  for (int i = 0; i < n; ++i) {
    const double u = params.family.draw_u(rng);
    const double t0 = std::fabs(gauss(rng));
    for (int j = 0; j < p; ++j) t1[j] = gauss(rng);
    const Vec z = sig_half * (delta * t0 + resid_half * t1);
    out.row(i) = (params.mu + z / std::sqrt(u)).transpose();
  }
  return out;
}

MixingMoments mixing_expectations_core(const MixingFamily& family, double d, int p,
                                       double A) {
  family.validate();
  if (!(d >= 0.0)) throw std::invalid_argument("negative Mahalanobis distance");
  switch (family.tag) {
    case Family::normal:
    case Family::skew_normal: {
      const double w = mills_inv(A);
      return {1.0, w, w};
    }
    case Family::skew_t: {
      const double nu = family.nu[0];
      const double den = t_cdf(A * std::sqrt((nu + p) / (nu + d)), nu + p);
      if (!(den > 0.0)) throw numeric_error("skew-t moment denominator vanished");
      const double u_hat = (nu + p) / (nu + d) *
                           t_cdf(A * std::sqrt((nu + p + 2.0) / (nu + d)), nu + p + 2.0) /
                           den;
      const double lb0 = std::log(0.5 * (nu + d));
      const double lb1 = std::log(0.5 * (nu + d + A * A));
      const double base = 0.5 * (nu + p) * lb0 - 0.5 * std::log(2.0 * M_PI) - std::log(den) -
                          lgam((nu + p) / 2.0);
      const double tau1 =
          std::exp(base + lgam((nu + p + 1.0) / 2.0) - 0.5 * (nu + p + 1.0) * lb1);
      const double tau_neg1 =
          std::exp(base + lgam((nu + p - 1.0) / 2.0) - 0.5 * (nu + p - 1.0) * lb1);
      if (!std::isfinite(u_hat) || !std::isfinite(tau1) || !std::isfinite(tau_neg1))
        throw numeric_error("skew-t mixing moments not finite");
      return {u_hat, tau1, tau_neg1};
    }
    case Family::skew_cont_normal: {
      const double nu1 = family.nu[0], nu2 = family.nu[1];
      // weights proportional to nu_i * u^{p/2} e^{-u d/2} at u in {nu2, 1}
      const double l1 = (nu1 > 0.0 ? std::log(nu1) + 0.5 * p * std::log(nu2) - 0.5 * nu2 * d
                                   : -std::numeric_limits<double>::infinity());
      const double l2 = std::log1p(-nu1) - 0.5 * d;
      const double m = std::max(l1, l2);
      const double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
      const double sn2 = std::sqrt(nu2);
      const double den = w1 * norm_cdf(sn2 * A) + w2 * norm_cdf(A);
      if (!(den > 0.0)) throw numeric_error("skew-cn moment denominator vanished");
      const double u_hat = (nu2 * w1 * norm_cdf(sn2 * A) + w2 * norm_cdf(A)) / den;
      const double tau1 = (sn2 * w1 * norm_pdf(sn2 * A) + w2 * norm_pdf(A)) / den;
      const double tau_neg1 = (w1 * norm_pdf(sn2 * A) / sn2 + w2 * norm_pdf(A)) / den;
      return {u_hat, tau1, tau_neg1};
    }
    case Family::skew_slash: {
      const double nu = family.nu[0];
      const double a = nu + 0.5 * p;  // base exponent + 1
      auto base = [&](double u, double shift, bool phi_kernel) {
        const double v = std::pow(u, a - 1.0 + shift) * std::exp(-0.5 * u * d);
        return v * (phi_kernel ? norm_pdf(std::sqrt(u) * A) : norm_cdf(std::sqrt(u) * A));
      };
      auto quad = [&](double shift, bool phi_kernel) {
        return integrate([&](double u) { return base(u, shift, phi_kernel); }, 0.0, 1.0,
                         1e-300, 1e-10, 200);
      };
      const double den = quad(0.0, false);
      if (!(den > 0.0)) throw numeric_error("skew-slash moment denominator vanished");
      return {quad(1.0, false) / den, quad(0.5, true) / den, quad(-0.5, true) / den};
    }
  }
  throw std::logic_error("unknown family");
}

MixingMoments mixing_expectations(const MixingFamily& family, const Vec& resid,
                                  const Mat& psi, double A) {
  Eigen::LLT<Mat> llt(psi);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("psi must be positive definite");
  const double d = resid.dot(llt.solve(resid));
  return mixing_expectations_core(family, d, static_cast<int>(resid.size()), A);
}

}  // namespace smsn
