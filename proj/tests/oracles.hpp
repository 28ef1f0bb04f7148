#pragma once

// Independent oracles used across the test suites. Everything here stays off
// the library's implementation paths on purpose: series expansions, brute
// force sums, simplex search, importance sampling.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "smsn/linalg.hpp"

namespace oracle {

using smsn::Mat;
using smsn::Vec;

// Phi via the erf Maclaurin series: erf(x) = 2/sqrt(pi) sum (-1)^n x^{2n+1} /
// (n! (2n+1)); converges fast for |x| <= 6, which covers every test input.
inline double norm_cdf_series(double x) {
  const double z = x / std::sqrt(2.0);
  double term = z, sum = z;
  for (int n = 1; n < 200; ++n) {
    term *= -z * z / n;
    const double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-18 * std::fabs(sum)) break;
  }
  return 0.5 * (1.0 + 2.0 / std::sqrt(M_PI) * sum);
}

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// ratio estimator m = sum(w g)/sum(w) with a delta-method standard error
struct RatioEstimate {
  double value = 0.0;
  double se = 0.0;
};

inline RatioEstimate ratio_estimate(const std::vector<double>& w,
                                    const std::vector<double>& g) {
  const std::size_t n = w.size();
  double sw = 0.0, swg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += w[i];
    swg += w[i] * g[i];
  }
  const double m = swg / sw;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = w[i] * (g[i] - m);
    var += e * e;
  }
  RatioEstimate out;
  out.value = m;
  out.se = std::sqrt(var) / sw * std::sqrt(static_cast<double>(n) / (n - 1.0));
  return out;
}

// dense Gaussian log-density, solve-based (no PsiSolver/Woodbury involved)
inline double gauss_logpdf(const Vec& resid, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (resid.size() * std::log(2.0 * M_PI) + logdet +
                 resid.dot(llt.solve(resid)));
}

// exact marginal log-likelihood of a Gaussian LMM: y_i ~ N(X_i beta, X_i D
// X_i' + s2 I), for the linear2 model where W = H = X
inline double lme_marginal_loglik(const std::vector<Mat>& X,
                                  const std::vector<Vec>& y, const Vec& beta,
                                  double s2, const Mat& D) {
  double ll = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    Mat cov = X[i] * D * X[i].transpose();
    cov.diagonal().array() += s2;
    ll += gauss_logpdf(y[i] - X[i] * beta, cov);
  }
  return ll;
}

// Nelder-Mead maximizer, restarted; enough for the <= 6-dim oracle problems
inline Vec nelder_mead(const std::function<double(const Vec&)>& f, Vec x0,
                       double scale = 0.1, int iters = 4000, int restarts = 3) {
  const int n = static_cast<int>(x0.size());
  Vec best = x0;
  double fbest = f(x0);
  for (int r = 0; r < restarts; ++r) {
    std::vector<std::pair<Vec, double>> sim;
    sim.push_back({best, fbest});
    for (int i = 0; i < n; ++i) {
      Vec x = best;
      x[i] += scale * std::max(1.0, std::fabs(x[i]));
      sim.push_back({x, f(x)});
    }
    for (int it = 0; it < iters; ++it) {
      std::sort(sim.begin(), sim.end(),
                [](const auto& a, const auto& b) { return a.second > b.second; });
      if (std::fabs(sim.front().second - sim.back().second) <
          1e-13 * (1.0 + std::fabs(sim.front().second)))
        break;
      Vec centroid = Vec::Zero(n);
      for (int i = 0; i < n; ++i) centroid += sim[i].first;
      centroid /= n;
      const Vec& worst = sim[n].first;
      Vec xr = centroid + (centroid - worst);
      double fr = f(xr);
      if (fr > sim[0].second) {
        Vec xe = centroid + 2.0 * (centroid - worst);
        double fe = f(xe);
        sim[n] = fe > fr ? std::make_pair(xe, fe) : std::make_pair(xr, fr);
      } else if (fr > sim[n - 1].second) {
        sim[n] = {xr, fr};
      } else {
        Vec xc = centroid + 0.5 * (worst - centroid);
        double fc = f(xc);
        if (fc > sim[n].second) {
          sim[n] = {xc, fc};
        } else {
          for (int i = 1; i <= n; ++i) {
            sim[i].first = sim[0].first + 0.5 * (sim[i].first - sim[0].first);
            sim[i].second = f(sim[i].first);
          }
        }
      }
    }
    std::sort(sim.begin(), sim.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    best = sim[0].first;
    fbest = sim[0].second;
    scale *= 0.2;
  }
  return best;
}

// two-sided KS statistic of sorted sample values against cdf values
inline double ks_statistic(std::vector<double> cdf_values) {
  std::sort(cdf_values.begin(), cdf_values.end());
  const int n = static_cast<int>(cdf_values.size());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    d = std::max(d, std::fabs(cdf_values[i] - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - cdf_values[i]));
  }
  return d;
}

// composite Simpson on [a,b]; panels must be even
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int panels = 2048) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace oracle
