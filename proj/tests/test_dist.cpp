#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/special_functions/gamma.hpp>
#include <random>

#include "oracles.hpp"
#include "smsn/dist.hpp"
#include "smsn/normal.hpp"
#include "smsn/quadrature.hpp"

using namespace smsn;

namespace {

SmsnParams params1(double mu, double s2, double lam, MixingFamily fam) {
  SmsnParams p;
  p.mu = Vec::Constant(1, mu);
  p.sigma = Mat::Constant(1, 1, s2);
  p.lambda = Vec::Constant(1, lam);
  p.family = std::move(fam);
  return p;
}

SmsnParams params2(MixingFamily fam) {
  SmsnParams p;
  p.mu = Vec(2);
  p.mu << 0.3, -0.2;
  p.sigma = Mat(2, 2);
  p.sigma << 1.3, 0.4, 0.4, 0.9;
  p.lambda = Vec(2);
  p.lambda << 2.0, -1.0;
  p.family = std::move(fam);
  return p;
}

const std::vector<MixingFamily> all_families() {
  return {MixingFamily::normal(), MixingFamily::skew_normal(), MixingFamily::skew_t(4.0),
          MixingFamily::skew_slash(2.0), MixingFamily::skew_cont_normal(0.3, 0.3)};
}

// independent SMN densities for the lambda = 0 collapse checks
double smn_logpdf(const Vec& y, const Vec& mu, const Mat& sigma,
                  const MixingFamily& fam) {
  const int p = static_cast<int>(y.size());
  Eigen::LLT<Mat> llt(sigma);
  const double logdet =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = (y - mu).dot(llt.solve(y - mu));
  switch (fam.tag) {
    case Family::normal:
    case Family::skew_normal:
      return -0.5 * (p * std::log(2 * M_PI) + logdet + d);
    case Family::skew_t: {
      const double nu = fam.nu[0];
      return std::lgamma((nu + p) / 2.0) - std::lgamma(nu / 2.0) -
             0.5 * p * std::log(nu * M_PI) - 0.5 * logdet -
             0.5 * (nu + p) * std::log1p(d / nu);
    }
    case Family::skew_cont_normal: {
      const double nu1 = fam.nu[0], nu2 = fam.nu[1];
      const double f = nu1 * std::exp(-0.5 * (p * std::log(2 * M_PI) + logdet -
                                              p * std::log(nu2) + nu2 * d)) +
                       (1 - nu1) * std::exp(-0.5 * (p * std::log(2 * M_PI) + logdet + d));
      return std::log(f);
    }
    case Family::skew_slash: {
      // nu (d/2)^{-(nu+p/2)} gammainc_lower(nu+p/2, d/2) (2pi)^{-p/2}|S|^{-1/2}
      const double nu = fam.nu[0];
      const double a = nu + 0.5 * p;
      if (d < 1e-12) return std::log(nu / a) - 0.5 * (p * std::log(2 * M_PI) + logdet);
      const double li = boost::math::gamma_p(a, d / 2.0);
      return std::log(nu) + std::lgamma(a) + std::log(li) - a * std::log(d / 2.0) -
             0.5 * (p * std::log(2 * M_PI) + logdet);
    }
  }
  return 0.0;
}

}  // namespace

TEST_CASE("sn_logpdf matches closed forms") {
  // lambda arbitrary at the mode: Phi(0) = 1/2 cancels the 2
  CHECK(sn_logpdf(Vec::Zero(1), params1(0, 1, 7, MixingFamily::skew_normal())) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  // lambda = 0 is plain normal
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int i = 0; i < 20; ++i) {
    const double y = 3.0 * g(rng);
    CHECK(sn_logpdf(Vec::Constant(1, y), params1(0.5, 2.0, 0, MixingFamily::skew_normal())) ==
          doctest::Approx(-0.5 * (std::log(2 * M_PI * 2.0) + (y - 0.5) * (y - 0.5) / 2.0))
              .epsilon(1e-12));
  }

  // y=1, lambda=1 against the erf-series oracle
  const double expected = std::log(2.0 * oracle::norm_pdf(1.0) * oracle::norm_cdf_series(1.0));
  CHECK(expected == doctest::Approx(std::log(0.40717)).epsilon(1e-4));
  CHECK(sn_logpdf(Vec::Ones(1), params1(0, 1, 1, MixingFamily::skew_normal())) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("smsn_logpdf special values") {
  // skew-t with nu=1, lambda=0 at the mode is Cauchy
  CHECK(smsn_logpdf(Vec::Zero(1), params1(0, 1, 0, MixingFamily::skew_t(1.0))) ==
        doctest::Approx(std::log(1.0 / M_PI)).epsilon(1e-10));

  // contamination weight zero reduces to skew-normal
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int i = 0; i < 10; ++i) {
    const double y = 2.0 * g(rng);
    CHECK(smsn_logpdf(Vec::Constant(1, y),
                      params1(0.2, 1.5, 2.0, MixingFamily::skew_cont_normal(0.0, 0.5))) ==
          doctest::Approx(sn_logpdf(Vec::Constant(1, y),
                                    params1(0.2, 1.5, 2.0, MixingFamily::skew_normal())))
              .epsilon(1e-12));
  }
}

TEST_CASE("skew-slash density against a brute-force grid") {
  // midpoint rule with 1e6 points on (0,1) for 2 nu u^{nu-1} phi(y; u^{-1}) Phi(u^{1/2} A)
  const double y = 0.5, lam = 2.0, nu = 2.0;
  const int N = 1000000;
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const double u = (i + 0.5) / N;
    sum += nu * std::pow(u, nu - 1.0) * std::sqrt(u) * oracle::norm_pdf(std::sqrt(u) * y) *
           oracle::norm_cdf_series(std::sqrt(u) * lam * y);
  }
  const double brute = std::log(2.0 * sum / N);
  CHECK(smsn_logpdf(Vec::Constant(1, y), params1(0, 1, lam, MixingFamily::skew_slash(nu))) ==
        doctest::Approx(brute).epsilon(1e-5));
}

TEST_CASE("k1 and c per family") {
  auto [k1_sn, c_sn] = k1_and_c(MixingFamily::skew_normal());
  CHECK(k1_sn == doctest::Approx(1.0));
  CHECK(c_sn == doctest::Approx(-std::sqrt(2.0 / M_PI)).epsilon(1e-12));

  auto [k1_st, c_st] = k1_and_c(MixingFamily::skew_t(4.0));
  CHECK(k1_st == doctest::Approx(std::sqrt(M_PI / 2.0)).epsilon(1e-12));
  CHECK(c_st == doctest::Approx(-1.0).epsilon(1e-12));

  auto [k1_scn, c_scn] = k1_and_c(MixingFamily::skew_cont_normal(0.3, 0.3));
  CHECK(k1_scn == doctest::Approx(1.2477).epsilon(1e-4));
  (void)c_scn;

  CHECK_THROWS_AS(k1_and_c(MixingFamily::skew_t(1.0)), std::domain_error);
  CHECK_THROWS_AS(k1_and_c(MixingFamily::skew_slash(0.4)), std::domain_error);
}

TEST_CASE("k1 Monte Carlo cross-checks") {
  std::mt19937_64 rng(42);
  const int N = 10000000;
  {
    // U ~ Gamma(2, rate 2) for skew-t nu=4
    std::gamma_distribution<double> g(2.0, 0.5);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double v = 1.0 / std::sqrt(g(rng));
      s += v;
      s2 += v * v;
    }
    const double mean = s / N;
    const double se = std::sqrt((s2 / N - mean * mean) / N);
    CHECK(std::fabs(mean - std::sqrt(M_PI / 2.0)) < 3.0 * se);
  }
  {
    // two-point mixing law for SCN(0.3, 0.3)
    std::uniform_real_distribution<double> un(0.0, 1.0);
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double u = un(rng) < 0.3 ? 0.3 : 1.0;
      const double v = 1.0 / std::sqrt(u);
      s += v;
      s2 += v * v;
    }
    const double mean = s / N;
    const double se = std::sqrt((s2 / N - mean * mean) / N);
    CHECK(std::fabs(mean - k1_and_c(MixingFamily::skew_cont_normal(0.3, 0.3)).first) <
          3.0 * se);
  }
}

TEST_CASE("delta_gamma identities") {
  {
    // the paper's simulation configuration: D = 100, lambda = 4
    auto dg = delta_gamma(Mat::Constant(1, 1, 100.0), Vec::Constant(1, 4.0));
    CHECK(dg.Delta[0] == doctest::Approx(40.0 / std::sqrt(17.0)).epsilon(1e-12));
    CHECK(dg.Delta[0] == doctest::Approx(9.7014).epsilon(1e-4));
  }
  {
    auto dg = delta_gamma(Mat::Constant(1, 1, 5.0), Vec::Zero(1));
    CHECK(dg.Delta[0] == 0.0);
    CHECK(dg.Gamma(0, 0) == doctest::Approx(5.0));
  }
  {
    Vec lam(2);
    lam << 3.0, 0.0;
    auto dg = delta_gamma(Mat::Identity(2, 2), lam);
    CHECK(dg.Delta[0] == doctest::Approx(3.0 / std::sqrt(10.0)).epsilon(1e-12));
    CHECK(dg.Delta[1] == doctest::Approx(0.0));
    CHECK(dg.Gamma(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(dg.Gamma(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // round trip on random PD D
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    const int q = 1 + rep % 3;
    Mat A(q, q);
    for (int i = 0; i < q * q; ++i) A(i / q, i % q) = g(rng);
    Mat D = A * A.transpose() + Mat::Identity(q, q);
    Vec lam(q);
    for (int i = 0; i < q; ++i) lam[i] = 3.0 * g(rng);
    auto dg = delta_gamma(D, lam);
    CHECK((dg.Gamma + dg.Delta * dg.Delta.transpose() - D).cwiseAbs().maxCoeff() <
          1e-12 * D.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sample_smsn moments") {
  const int N = 100000;
  {
    Mat draws = sample_smsn(N, params1(1.5, 4.0, 0, MixingFamily::normal()), 1);
    const double mean = draws.col(0).mean();
    CHECK(std::fabs(mean - 1.5) < 4.0 * 2.0 / std::sqrt(static_cast<double>(N)));
  }
  {
    // SN(0,1,4): E{Y} = sqrt(2/pi) * 4/sqrt(17)
    Mat draws = sample_smsn(N, params1(0, 1, 4, MixingFamily::skew_normal()), 2);
    const double mean = draws.col(0).mean();
    const double expect = std::sqrt(2.0 / M_PI) * 4.0 / std::sqrt(17.0);
    CHECK(expect == doctest::Approx(0.7742).epsilon(2e-4));
    const double sd = std::sqrt(1.0 - expect * expect);
    CHECK(std::fabs(mean - expect) < 4.0 * sd / std::sqrt(static_cast<double>(N)));
  }
}

TEST_CASE("sample_smsn skew-t ecdf against the density") {
  auto par = params1(0, 1, 4, MixingFamily::skew_t(4.0));
  const int N = 20000;
  Mat draws = sample_smsn(N, par, 5);
  // cdf by integrating the pdf from far left
  auto pdf = [&](double x) { return std::exp(smsn_logpdf(Vec::Constant(1, x), par)); };
  std::vector<double> xs(N);
  for (int i = 0; i < N; ++i) xs[i] = draws(i, 0);
  std::sort(xs.begin(), xs.end());
  // evaluate cdf at every 100th order statistic, accumulate panel by panel
  std::vector<double> u;
  double cdf = 0.0, prev = -60.0;
  for (int i = 0; i < N; i += 100) {
    cdf += oracle::simpson(pdf, prev, xs[i], 512);
    prev = xs[i];
    u.push_back(cdf);
  }
  double dmax = 0.0;
  const int m = static_cast<int>(u.size());
  for (int i = 0; i < m; ++i) {
    const double emp_lo = static_cast<double>(i * 100) / N;
    const double emp_hi = static_cast<double>(i * 100 + 1) / N;
    dmax = std::max(dmax, std::fabs(u[i] - emp_lo));
    dmax = std::max(dmax, std::fabs(u[i] - emp_hi));
  }
  // 99% Kolmogorov band
  CHECK(dmax < 1.63 / std::sqrt(static_cast<double>(N)));
}

TEST_CASE("mixing_expectations per family") {
  {
    // degenerate U == 1
    auto m = mixing_expectations_core(MixingFamily::skew_normal(), 2.3, 1, 0.7);
    CHECK(m.u_hat == doctest::Approx(1.0));
    CHECK(m.tau1 == doctest::Approx(norm_pdf(0.7) / norm_cdf(0.7)).epsilon(1e-12));
    CHECK(m.tau1 == doctest::Approx(m.tau_neg1));
  }
  {
    // SCN with A = 0: exact two-term weighted mean, W_Phi(0) = sqrt(2/pi)
    const double nu1 = 0.3, nu2 = 0.4, d = 1.7;
    const int p = 2;
    auto m = mixing_expectations_core(MixingFamily::skew_cont_normal(nu1, nu2), d, p, 0.0);
    const double w1 = nu1 * std::pow(nu2, p / 2.0) * std::exp(-0.5 * nu2 * d);
    const double w2 = (1 - nu1) * std::exp(-0.5 * d);
    CHECK(m.u_hat == doctest::Approx((nu2 * w1 + w2) / (w1 + w2)).epsilon(1e-12));
    const double wphi0 = std::sqrt(2.0 / M_PI);
    CHECK((m.tau1 + m.tau_neg1) / 2.0 ==
          doctest::Approx(wphi0 * (std::sqrt(nu2) * w1 + w2) / (2 * (w1 + w2)) +
                          wphi0 * (w1 / std::sqrt(nu2) + w2) / (2 * (w1 + w2)))
              .epsilon(1e-12));
  }
}

namespace {

// importance-sampling oracle for the defining integrals: draw U from its
// prior mixing law, weight by u^{p/2} e^{-u d/2} {Phi or phi}(u^{1/2} A)
void mc_moment_check(const MixingFamily& fam, double d, int p, double A,
                     std::uint64_t seed, int n_draws) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(n_draws), gu(n_draws), g1(n_draws), gm1(n_draws), wphi(n_draws);
  for (int i = 0; i < n_draws; ++i) {
    const double u = fam.draw_u(rng);
    const double base = std::pow(u, 0.5 * p) * std::exp(-0.5 * u * d);
    const double su = std::sqrt(u);
    w[i] = base * smsn::norm_cdf(su * A);
    wphi[i] = base * oracle::norm_pdf(su * A);
    gu[i] = u;
    g1[i] = su;
    gm1[i] = 1.0 / su;
  }
  const MixingMoments m = mixing_expectations_core(fam, d, p, A);
  auto uh = oracle::ratio_estimate(w, gu);
  CHECK(std::fabs(m.u_hat - uh.value) < 3.0 * uh.se + 1e-12);
  // tau1 = E[sqrt(u) phi] / E[Phi]; use the shared denominator sum
  double sw = 0.0, s1 = 0.0, sm1 = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    sw += w[i];
    s1 += wphi[i] * g1[i];
    sm1 += wphi[i] * gm1[i];
  }
  std::vector<double> h1(n_draws), hm1(n_draws);
  const double t1 = s1 / sw, tm1 = sm1 / sw;
  double v1 = 0.0, vm1 = 0.0;
  for (int i = 0; i < n_draws; ++i) {
    v1 += std::pow(wphi[i] * g1[i] - w[i] * t1, 2);
    vm1 += std::pow(wphi[i] * gm1[i] - w[i] * tm1, 2);
  }
  const double se1 = std::sqrt(v1) / sw, sem1 = std::sqrt(vm1) / sw;
  CHECK(std::fabs(m.tau1 - t1) < 3.0 * se1 + 1e-12);
  CHECK(std::fabs(m.tau_neg1 - tm1) < 3.0 * sem1 + 1e-12);
}

}  // namespace

TEST_CASE("mixing_expectations against importance-sampling oracles") {
  mc_moment_check(MixingFamily::skew_t(4.0), 1.0, 1, 0.5, 99, 10000000);
  mc_moment_check(MixingFamily::skew_slash(2.0), 2.5, 2, -0.8, 100, 2000000);
  mc_moment_check(MixingFamily::skew_cont_normal(0.3, 0.3), 0.9, 1, 1.2, 101, 2000000);
}

TEST_CASE("mixing_expectations positivity") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  for (const auto& fam : all_families()) {
    for (int rep = 0; rep < 25; ++rep) {
      const double d = 10.0 * un(rng);
      const double A = 8.0 * (un(rng) - 0.5);
      const int p = 1 + static_cast<int>(3 * un(rng));
      const MixingMoments m = mixing_expectations_core(fam, d, p, A);
      CHECK(m.u_hat > 0.0);
      CHECK(m.tau1 > 0.0);
      CHECK(m.tau_neg1 > 0.0);
    }
  }
}

TEST_CASE("density integrates to one, p = 1") {
  for (const auto& fam : all_families()) {
    auto par = params1(0.3, 1.7, fam.skewed() ? 2.0 : 0.0, fam);
    auto pdf = [&](double x) { return std::exp(smsn_logpdf(Vec::Constant(1, x), par)); };
    const double mass = integrate(pdf, -120.0, 120.0, 1e-9, 1e-9, 200);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("density integrates to one, p = 2") {
  for (const auto& fam : all_families()) {
    auto par = params2(fam);
    double mass = 0.0;
    // composite Gauss-Legendre panels per dimension
    const int panels = 24, nodes = 10;
    static const double gx[5] = {0.1488743389816312, 0.4333953941292472,
                                 0.6794095682990244, 0.8650633666889845,
                                 0.9739065285171717};
    static const double gw[5] = {0.2955242247147529, 0.2692667193099963,
                                 0.2190863625159820, 0.1494513491505806,
                                 0.0666713443086881};
    const double lo = -80.0, hi = 80.0, h = (hi - lo) / panels;
    std::vector<double> xs, ws;
    for (int pnl = 0; pnl < panels; ++pnl) {
      const double c = lo + (pnl + 0.5) * h;
      for (int k = 0; k < nodes / 2; ++k) {
        xs.push_back(c - 0.5 * h * gx[k]);
        ws.push_back(0.5 * h * gw[k]);
        xs.push_back(c + 0.5 * h * gx[k]);
        ws.push_back(0.5 * h * gw[k]);
      }
    }
    Vec y(2);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < xs.size(); ++j) {
        y << xs[i], xs[j];
        mass += ws[i] * ws[j] * std::exp(smsn_logpdf(y, par));
      }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("skew-t converges to skew-normal as nu grows") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g;
  auto st = params1(0.1, 1.4, 1.5, MixingFamily::skew_t(1e6));
  auto sn = params1(0.1, 1.4, 1.5, MixingFamily::skew_normal());
  auto st2 = params2(MixingFamily::skew_t(1e6));
  auto sn2 = params2(MixingFamily::skew_normal());
  for (int i = 0; i < 50; ++i) {
    const double y = 3.0 * g(rng);
    CHECK(smsn_logpdf(Vec::Constant(1, y), st) ==
          doctest::Approx(sn_logpdf(Vec::Constant(1, y), sn)).epsilon(1e-5));
    Vec y2(2);
    y2 << 3.0 * g(rng), 3.0 * g(rng);
    CHECK(smsn_logpdf(y2, st2) == doctest::Approx(sn_logpdf(y2, sn2)).epsilon(1e-5));
  }
}

TEST_CASE("lambda = 0 collapses to the symmetric SMN counterpart") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g;
  for (const auto& fam : all_families()) {
    auto par1 = params1(0.2, 1.6, 0.0, fam);
    auto par2 = params2(fam);
    par2.lambda.setZero();
    for (int i = 0; i < 20; ++i) {
      const Vec y1 = Vec::Constant(1, 2.5 * g(rng));
      CHECK(smsn_logpdf(y1, par1) ==
            doctest::Approx(smn_logpdf(y1, par1.mu, par1.sigma, fam)).epsilon(1e-12));
      Vec y2(2);
      y2 << 2.5 * g(rng), 2.5 * g(rng);
      CHECK(smsn_logpdf(y2, par2) ==
            doctest::Approx(smn_logpdf(y2, par2.mu, par2.sigma, fam)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample moments match quadrature moments of the density") {
  const int N = 100000;
  int seed = 1000;
  for (const auto& fam : all_families()) {
    auto par = params1(0.4, 1.3, fam.skewed() ? 1.8 : 0.0, fam);
    Mat draws = sample_smsn(N, par, ++seed);
    auto pdf = [&](double x) { return std::exp(smsn_logpdf(Vec::Constant(1, x), par)); };
    // heavy-tail second moments need wide supports; slash/skew-t have
    // polynomial tails so integrate far out
    auto mom = [&](int k) {
      return integrate([&](double x) { return std::pow(x, k) * pdf(x); }, -4000.0,
                       4000.0, 1e-10, 1e-10, 200);
    };
    const double m1 = mom(1), m2 = mom(2);
    const double mean = draws.col(0).mean();
    const double second = draws.col(0).squaredNorm() / N;
    // Monte Carlo SEs estimated from the sample itself
    double v1 = 0.0, v2 = 0.0;
    for (int i = 0; i < N; ++i) {
      v1 += std::pow(draws(i, 0) - mean, 2);
      v2 += std::pow(draws(i, 0) * draws(i, 0) - second, 2);
    }
    const double se1 = std::sqrt(v1 / N / N), se2 = std::sqrt(v2 / N / N);
    CHECK(std::fabs(mean - m1) < 4.0 * se1);
    CHECK(std::fabs(second - m2) < 4.0 * se2);
  }
}

TEST_CASE("W_Phi asymptotics stay finite and smooth") {
  CHECK(mills_inv(0.0) == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-12));
  // continuity across the switch at -37
  CHECK(mills_inv(-36.999) == doctest::Approx(mills_inv(-37.001)).epsilon(1e-10));
  // deep tail: W(x) ~ -x
  CHECK(mills_inv(-200.0) == doctest::Approx(200.0 + 1.0 / 200.0).epsilon(1e-4));
  CHECK(std::isfinite(norm_logcdf(-300.0)));
  CHECK(norm_logcdf(-300.0) < -44000.0);
}

TEST_CASE("parameter validation") {
  auto par = params1(0, 1, 1, MixingFamily::skew_normal());
  par.sigma(0, 0) = -1.0;
  CHECK_THROWS_AS(sn_logpdf(Vec::Zero(1), par), std::invalid_argument);
  CHECK_THROWS_AS(MixingFamily::skew_t(-1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(MixingFamily::skew_cont_normal(0.5, 1.5).validate(),
                  std::invalid_argument);
}
