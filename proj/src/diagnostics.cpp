#include "smsn/diagnostics.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "smsn/normal.hpp"
#include "smsn/quadrature.hpp"

namespace smsn {

namespace {

double chi2_cdf(double x, int k) {
  if (x <= 0.0) return 0.0;
  boost::math::chi_squared_distribution<double> dist(k);
  return boost::math::cdf(dist, x);
}

}  // namespace

double mahalanobis_cdf(const MixingFamily& family, double x, int ni) {
  family.validate();
  if (x <= 0.0) return 0.0;
  switch (family.tag) {
    case Family::normal:
    case Family::skew_normal:
      return chi2_cdf(x, ni);
    case Family::skew_t: {
      // d = chi2_n / U with nu U ~ chi2_nu, so d/n ~ F(n, nu)
      boost::math::fisher_f_distribution<double> dist(ni, family.nu[0]);
      return boost::math::cdf(dist, x / ni);
    }
    case Family::skew_cont_normal:
      return family.nu[0] * chi2_cdf(family.nu[1] * x, ni) +
             (1.0 - family.nu[0]) * chi2_cdf(x, ni);
    case Family::skew_slash: {
      const double nu = family.nu[0];
      return integrate(
          [&](double u) { return nu * std::pow(u, nu - 1.0) * chi2_cdf(u * x, ni); },
          0.0, 1.0, 1e-12, 1e-10, 200);
    }
  }
  throw std::logic_error("unknown family");
}

HealyData healy_data(const NlmeModel& model, const FitResult& fit, const Dataset& data) {
  const Vec d = mahalanobis(model, fit.theta, fit.b_hat, data);
  const int n = static_cast<int>(d.size());
  std::vector<double> probs(n);
  for (int i = 0; i < n; ++i)
    probs[i] = mahalanobis_cdf(fit.theta.family, d[i],
                               static_cast<int>(data.subjects[i].y.size()));
  std::sort(probs.begin(), probs.end());
  HealyData out;
  out.nominal.resize(n);
  out.theoretical.resize(n);
  for (int i = 0; i < n; ++i) {
    out.nominal[i] = static_cast<double>(i + 1) / n;
    out.theoretical[i] = probs[i];
  }
  return out;
}

std::vector<QqColumn> qq_data(const std::vector<Vec>& b_hat) {
  if (b_hat.size() < 3) throw std::invalid_argument("qq_data needs >= 3 subjects");
  const int n = static_cast<int>(b_hat.size());
  const int q = static_cast<int>(b_hat.front().size());
  std::vector<QqColumn> out(q);
  for (int j = 0; j < q; ++j) {
    std::vector<double> col(n);
    for (int i = 0; i < n; ++i) col[i] = b_hat[i][j];
    std::sort(col.begin(), col.end());
    QqColumn& c = out[j];
    c.sample_q.resize(n);
    c.normal_q.resize(n);
    for (int i = 0; i < n; ++i) {
      c.sample_q[i] = col[i];
      c.normal_q[i] = norm_quantile((i + 0.5) / n);
    }
    const double mean = c.sample_q.mean();
    c.degenerate = (c.sample_q.array() - mean).abs().maxCoeff() == 0.0;
  }
  return out;
}

}  // namespace smsn
