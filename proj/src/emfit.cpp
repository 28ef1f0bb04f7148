#include "smsn/emfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smsn {

namespace {

constexpr double kDeltaClamp = 1.0 - 1e-6;

Vec vech(const Mat& m) {
  const int q = static_cast<int>(m.rows());
  Vec v(q * (q + 1) / 2);
  int k = 0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j) v[k++] = m(i, j);
  return v;
}

Mat unvech(const Vec& v, int q) {
  Mat m(q, q);
  int k = 0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j) {
      m(i, j) = v[k];
      m(j, i) = v[k];
      ++k;
    }
  return m;
}

double sample_skewness(const Vec& x) {
  const int n = static_cast<int>(x.size());
  const double mean = x.mean();
  double m2 = 0.0, m3 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = x[i] - mean;
    m2 += e * e;
    m3 += e * e * e;
  }
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// pooled nonlinear least squares (all b = 0), damped Gauss-Newton
Vec pooled_nls(const NlmeModel& model, const Dataset& data) {
  Vec beta = model.start ? model.start(data) : Vec::Zero(model.p);
  const Vec b0 = Vec::Zero(model.q);
  auto sse = [&](const Vec& bt) {
    double s = 0.0;
    for (const auto& sub : data.subjects)
      s += (sub.y - eval_eta(model, bt, b0, sub)).squaredNorm();
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };
  double cur = sse(beta);
  for (int it = 0; it < 200; ++it) {
    Mat jtj = Mat::Zero(model.p, model.p);
    Vec jtr = Vec::Zero(model.p);
    for (const auto& sub : data.subjects) {
      auto [H, W] = jacobians(model, beta, b0, sub);
      (void)H;
      const Vec r = sub.y - eval_eta(model, beta, b0, sub);
      jtj += W.transpose() * W;
      jtr += W.transpose() * r;
    }
    jtj.diagonal().array() += 1e-10 * (1.0 + jtj.diagonal().maxCoeff());
    Vec step = jtj.ldlt().solve(jtr);
    double scale = 1.0;
    Vec cand;
    double next = std::numeric_limits<double>::infinity();
    for (int half = 0; half < 30; ++half) {
      cand = beta + scale * step;
      next = sse(cand);
      if (next < cur) break;
      scale *= 0.5;
    }
    if (!(next < cur)) break;
    beta = cand;
    if (cur - next < 1e-12 * (1.0 + cur)) {
      cur = next;
      break;
    }
    cur = next;
  }
  return beta;
}

struct CrudeStart {
  Vec beta;
  double sigma2;
  Mat D;
  std::vector<Vec> b;
};

// beta from pooled NLS; D0/sigma0 scale read off one ridge projection per
// subject, expansion points start at b = 0
CrudeStart crude_start(const NlmeModel& model, const Dataset& data) {
  CrudeStart out;
  out.beta = pooled_nls(model, data);
  const Vec zero = Vec::Zero(model.q);
  double sse = 0.0;
  int nres = 0;
  Mat bsum = Mat::Zero(model.q, model.q);
  std::vector<Vec> proj;
  Vec bmean = Vec::Zero(model.q);
  for (const auto& sub : data.subjects) {
    auto [H, W] = jacobians(model, out.beta, zero, sub);
    (void)W;
    const Vec r = sub.y - eval_eta(model, out.beta, zero, sub);
    Mat hth = H.transpose() * H;
    hth.diagonal().array() += 1e-6 * (1.0 + hth.diagonal().maxCoeff());
    const Vec bi = hth.ldlt().solve(H.transpose() * r);
    proj.push_back(bi);
    sse += (r - H * bi).squaredNorm();
    nres += static_cast<int>(sub.y.size());
    bmean += bi;
  }
  bmean /= static_cast<double>(proj.size());
  for (const auto& bi : proj) bsum += (bi - bmean) * (bi - bmean).transpose();
  out.D = bsum / std::max<double>(1.0, static_cast<double>(proj.size()) - 1.0);
  out.sigma2 = std::max(sse / std::max(nres, 1), 1e-8);
  out.D.diagonal().array() += 1e-4 * (1.0 + out.D.diagonal().maxCoeff());
  out.b.assign(data.subjects.size(), zero);
  return out;
}

double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  double xtol) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > xtol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

// 2-D Nelder-Mead on (0,1)^2 with reflection back into the box
Vec nelder_mead_unit2(const std::function<double(const Vec&)>& f, Vec x0) {
  auto clampv = [](Vec x) {
    for (int i = 0; i < 2; ++i) {
      while (x[i] < 0.0 || x[i] > 1.0) {
        if (x[i] < 0.0) x[i] = -x[i];
        if (x[i] > 1.0) x[i] = 2.0 - x[i];
      }
      x[i] = std::clamp(x[i], 1e-4, 1.0 - 1e-4);
    }
    return x;
  };
  struct Pt {
    Vec x;
    double v;
  };
  std::vector<Pt> sim;
  x0 = clampv(x0);
  sim.push_back({x0, f(x0)});
  for (int i = 0; i < 2; ++i) {
    Vec x = x0;
    x[i] = std::clamp(x[i] + 0.1, 1e-4, 1.0 - 1e-4);
    sim.push_back({clampv(x), f(clampv(x))});
  }
  for (int it = 0; it < 120; ++it) {
    std::sort(sim.begin(), sim.end(), [](const Pt& a, const Pt& b) { return a.v > b.v; });
    if (std::fabs(sim[0].v - sim[2].v) < 1e-9 * (1.0 + std::fabs(sim[0].v))) break;
    const Vec centroid = 0.5 * (sim[0].x + sim[1].x);
    const Vec xr = clampv(centroid + (centroid - sim[2].x));
    const double fr = f(xr);
    if (fr > sim[0].v) {
      const Vec xe = clampv(centroid + 2.0 * (centroid - sim[2].x));
      const double fe = f(xe);
      sim[2] = fe > fr ? Pt{xe, fe} : Pt{xr, fr};
    } else if (fr > sim[1].v) {
      sim[2] = {xr, fr};
    } else {
      const Vec xc = clampv(centroid + 0.5 * (sim[2].x - centroid));
      const double fc = f(xc);
      if (fc > sim[2].v) {
        sim[2] = {xc, fc};
      } else {
        for (int i = 1; i < 3; ++i) {
          sim[i].x = clampv(sim[0].x + 0.5 * (sim[i].x - sim[0].x));
          sim[i].v = f(sim[i].x);
        }
      }
    }
  }
  std::sort(sim.begin(), sim.end(), [](const Pt& a, const Pt& b) { return a.v > b.v; });
  return sim[0].x;
}

}  // namespace

double aic(double loglik, int n_free) { return -2.0 * loglik + 2.0 * n_free; }

int free_param_count(const NlmeModel& model, const MixingFamily& family, bool fix_nu) {
  int n = model.p + 1 + model.q * (model.q + 1) / 2;
  if (family.skewed()) n += model.q;
  if (family.has_nu() && !fix_nu) n += family.nu_dim();
  return n;
}

std::vector<EStepQuantities> estep(const Theta& theta,
                                   const std::vector<LinearizedSubject>& lin) {
  const Theta::Derived d = theta.derived();
  const int q = theta.q();
  const double s2 = theta.sigma2_e;
  Eigen::LLT<Mat> gllt = chol_pd(d.Gamma, "Gamma");
  std::vector<EStepQuantities> out(lin.size());
  for (std::size_t i = 0; i < lin.size(); ++i) {
    const LinearizedSubject& l = lin[i];
    EStepQuantities& e = out[i];
    e.Omega = l.H * d.Gamma * l.H.transpose();
    e.Omega.diagonal().array() += s2;
    Eigen::LLT<Mat> ollt = chol_pd(e.Omega, "Omega");
    const Vec HD = l.H * d.Delta;
    const double m2 = 1.0 / (1.0 + HD.dot(ollt.solve(HD)));
    e.M = std::sqrt(m2);
    const Vec resid_c = l.ytilde - l.center;  // ytilde - W beta - c H Delta
    e.mu = m2 * HD.dot(ollt.solve(resid_c));
    Mat b_inv = gllt.solve(Mat::Identity(q, q)) + l.H.transpose() * l.H / s2;
    e.B = chol_pd(b_inv, "B inverse").solve(Mat::Identity(q, q));
    e.s = d.Delta - e.B * (l.H.transpose() * (l.H * d.Delta)) / s2;
    e.r = e.B * (l.H.transpose() * (l.ytilde - l.W * theta.beta)) / s2;
    const double dd = l.psi_solver->quad(resid_c);
    const MixingMoments mom =
        mixing_expectations_core(theta.family, dd, l.n, e.mu / e.M);
    e.u_hat = mom.u_hat;
    e.tau1 = mom.tau1;
    const double muc = e.mu + d.c;
    e.ut = e.u_hat * muc + e.M * e.tau1;
    e.ut2 = e.u_hat * muc * muc + m2 + e.M * (e.mu + 2.0 * d.c) * e.tau1;
    e.ub = e.u_hat * e.r + e.s * e.ut;
    e.utb = e.r * e.ut + e.s * e.ut2;
    e.ubb = e.B + e.u_hat * (e.r * e.r.transpose()) +
            (e.r * e.s.transpose() + e.s * e.r.transpose()) * e.ut +
            (e.s * e.s.transpose()) * e.ut2;
  }
  return out;
}

Theta cm_update(const Theta& theta, const std::vector<EStepQuantities>& E,
                const std::vector<LinearizedSubject>& lin) {
  const int p = theta.p();
  const int q = theta.q();
  const int n = static_cast<int>(lin.size());
  Theta next = theta;

  // CM-step 1
  Mat sww = Mat::Zero(p, p);
  Vec swy = Vec::Zero(p);
  for (int i = 0; i < n; ++i) {
    sww += E[i].u_hat * (lin[i].W.transpose() * lin[i].W);
    swy += lin[i].W.transpose() * (E[i].u_hat * lin[i].ytilde - lin[i].H * E[i].ub);
  }
  Eigen::LLT<Mat> swwllt(sww);
  if (swwllt.info() != Eigen::Success)
    throw numeric_error("CM-step 1: sum u W'W is rank deficient");
  next.beta = swwllt.solve(swy);

  // CM-step 2
  double N = 0.0, acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vec e = lin[i].ytilde - lin[i].W * next.beta;
    const Mat Hubb = lin[i].H * E[i].ubb;
    acc += E[i].u_hat * e.squaredNorm() - 2.0 * e.dot(lin[i].H * E[i].ub) +
           (Hubb.cwiseProduct(lin[i].H)).sum();
    N += lin[i].n;
  }
  next.sigma2_e = std::max(acc / N, 1e-12);

  if (theta.family.skewed()) {
    // CM-steps 3 and 4
    Vec sutb = Vec::Zero(q);
    double sut2 = 0.0;
    for (int i = 0; i < n; ++i) {
      sutb += E[i].utb;
      sut2 += E[i].ut2;
    }
    const Vec Delta = sutb / sut2;
    Mat Gamma = Mat::Zero(q, q);
    for (int i = 0; i < n; ++i)
      Gamma += E[i].ubb - E[i].utb * Delta.transpose() - Delta * E[i].utb.transpose() +
               E[i].ut2 * (Delta * Delta.transpose());
    Gamma /= n;
    const Mat D = Gamma + Delta * Delta.transpose();
    next.dhalf = sym_sqrt(D);
    Vec delta = next.dhalf.ldlt().solve(Delta);
    double g = delta.squaredNorm();
    if (g > kDeltaClamp) {
      delta *= std::sqrt(kDeltaClamp / g);
      g = kDeltaClamp;
    }
    next.lambda = delta / std::sqrt(1.0 - g);
  } else {
    // symmetric case: Delta = 0, D = Gamma = mean of (ubb)
    Mat D = Mat::Zero(q, q);
    for (int i = 0; i < n; ++i) D += E[i].ubb;
    D /= n;
    next.dhalf = sym_sqrt(D);
    next.lambda = Vec::Zero(q);
  }
  return next;
}

std::pair<MixingFamily, bool> update_nu(const Theta& theta,
                                        const std::vector<LinearizedSubject>& lin) {
  MixingFamily fam = theta.family;
  bool at_bound = false;
  auto profile = [&](const Vec& nu) {
    Theta t = theta;
    t.family.nu = nu;
    return approx_loglik_t2(t, lin);
  };
  switch (fam.tag) {
    case Family::skew_t: {
      const double lo = 2.1, hi = 100.0;
      const double nu = golden_max(
          [&](double v) { return profile(Vec::Constant(1, v)); }, lo, hi, 1e-3);
      fam.nu = Vec::Constant(1, nu);
      at_bound = nu < lo + 0.05 || nu > hi - 0.5;
      break;
    }
    case Family::skew_slash: {
      const double lo = 1.1, hi = 50.0;
      const double nu = golden_max(
          [&](double v) { return profile(Vec::Constant(1, v)); }, lo, hi, 1e-3);
      fam.nu = Vec::Constant(1, nu);
      at_bound = nu < lo + 0.05 || nu > hi - 0.25;
      break;
    }
    case Family::skew_cont_normal: {
      const Vec nu = nelder_mead_unit2(profile, fam.nu);
      fam.nu = nu;
      at_bound = nu.minCoeff() < 2e-4 || nu.maxCoeff() > 1.0 - 2e-4;
      break;
    }
    default:
      break;
  }
  return {fam, at_bound};
}

std::vector<Vec> empirical_bayes(const Theta& theta,
                                 const std::vector<LinearizedSubject>& lin) {
  const Theta::Derived d = theta.derived();
  const int q = theta.q();
  std::vector<Vec> out(lin.size());
  for (std::size_t i = 0; i < lin.size(); ++i) {
    const LinearizedSubject& l = lin[i];
    // Lambda at the current theta (the stored one was built at linearization)
    Eigen::LLT<Mat> dllt = chol_pd(d.D, "D");
    Mat lam_inv =
        dllt.solve(Mat::Identity(q, q)) + l.H.transpose() * l.H / theta.sigma2_e;
    const Mat Lambda = chol_pd(lam_inv, "Lambda inverse").solve(Mat::Identity(q, q));
    const double denom = std::sqrt(1.0 + d.zeta.dot(Lambda * d.zeta));
    const Vec resid_c = l.ytilde - l.W * theta.beta - d.c * (l.H * d.Delta);
    PsiSolver psi(l.H, d.D, theta.sigma2_e);
    const Vec psi_resid = psi.solve(resid_c);
    const Vec mu_b = d.c * d.Delta + d.D * (l.H.transpose() * psi_resid);
    const double A = (l.H * (d.D * d.zeta)).dot(psi_resid) / denom;
    const double tau_neg1 =
        mixing_expectations_core(theta.family, psi.quad(resid_c), l.n, A).tau_neg1;
    out[i] = mu_b + tau_neg1 * (Lambda * d.zeta) / denom;
  }
  return out;
}

std::pair<Theta, std::vector<Vec>> start_values(const NlmeModel& model,
                                                const Dataset& data,
                                                const MixingFamily& family,
                                                const FitOptions& options) {
  if (data.subjects.empty()) throw std::invalid_argument("empty dataset");
  const CrudeStart cs = crude_start(model, data);
  Theta theta;
  theta.beta = cs.beta;
  theta.sigma2_e = cs.sigma2;
  theta.dhalf = sym_sqrt(cs.D);
  theta.lambda = Vec::Zero(model.q);
  theta.family = MixingFamily::normal();
  if (family.tag == Family::normal) return {theta, cs.b};

  // Gaussian pre-fit, then lambda0 = 3 sign(skewness), family-specific nu0
  FitOptions gauss_opt = options;
  gauss_opt.compute_se = false;
  gauss_opt.fix_nu = true;
  FitResult pre = fit_from(model, data, theta, cs.b, gauss_opt);
  Theta theta0 = pre.theta;
  theta0.family = family;
  Vec lam0(model.q);
  Mat bmat(static_cast<int>(pre.b_hat.size()), model.q);
  for (std::size_t i = 0; i < pre.b_hat.size(); ++i)
    bmat.row(static_cast<int>(i)) = pre.b_hat[i].transpose();
  for (int l = 0; l < model.q; ++l)
    lam0[l] = 3.0 * sign(sample_skewness(bmat.col(l)));
  theta0.lambda = lam0;
  if (family.has_nu() && family.nu.size() == 0) {
    switch (family.tag) {
      case Family::skew_t:
        theta0.family.nu = Vec::Constant(1, 10.0);
        break;
      case Family::skew_slash:
        theta0.family.nu = Vec::Constant(1, 5.0);
        break;
      case Family::skew_cont_normal: {
        Vec v(2);
        v << 0.05, 0.8;
        theta0.family.nu = v;
        break;
      }
      default:
        break;
    }
  }
  theta0.family.validate();
  return {theta0, pre.b_hat};
}

FitResult fit_from(const NlmeModel& model, const Dataset& data, const Theta& theta0,
                   const std::vector<Vec>& b0, const FitOptions& options) {
  Theta theta = theta0;
  std::vector<Vec> b_t = b0;
  Vec beta_tilde = theta.beta;
  FitResult res;
  res.nu_at_bound = false;
  double ll_prev = std::numeric_limits<double>::quiet_NaN();
  double best_ll = -std::numeric_limits<double>::infinity();
  Theta best_theta = theta;
  std::vector<Vec> best_b = b_t;
  int k = 0;
  for (; k < options.max_iter; ++k) {
    std::vector<LinearizedSubject> lin;
    try {
      lin = linearize_all(model, theta, beta_tilde, b_t, data);
      const std::vector<EStepQuantities> E = estep(theta, lin);
      theta = cm_update(theta, E, lin);
      if (theta.family.has_nu() && !options.fix_nu &&
          (k % std::max(options.nu_update_every, 1) == 0)) {
        auto [fam, bound] = update_nu(theta, lin);
        theta.family = fam;
        res.nu_at_bound = bound;
      }
      b_t = empirical_bayes(theta, lin);
      beta_tilde = theta.beta;
    } catch (const numeric_error&) {
      break;  // keep the best iterate
    }
    double ll;
    try {
      ll = approx_loglik(model, theta, b_t, data);
    } catch (const numeric_error&) {
      break;
    }
    res.trace.push_back({ll, theta.flatten()});
    if (!std::isfinite(ll)) break;
    if (ll >= best_ll) {
      best_ll = ll;
      best_theta = theta;
      best_b = b_t;
    }
    if (std::isfinite(ll_prev) && std::fabs(ll / ll_prev - 1.0) < options.tol) {
      res.converged = true;
      ++k;
      break;
    }
    ll_prev = ll;
  }
  if (res.trace.empty()) {
    double ll0 = -std::numeric_limits<double>::infinity();
    try {
      ll0 = approx_loglik(model, theta0, b0, data);
    } catch (const numeric_error&) {
    }
    res.trace.push_back({ll0, theta0.flatten()});
    if (ll0 > best_ll) {
      best_ll = ll0;
      best_theta = theta0;
      best_b = b0;
    }
  }
  res.iterations = k;
  res.theta = best_theta;
  res.b_hat = best_b;
  res.loglik = best_ll;
  res.n_free = free_param_count(model, theta.family, options.fix_nu);
  res.aic = aic(res.loglik, res.n_free);
  if (options.compute_se) {
    auto [se, ok] = standard_errors(model, res.theta, res.theta.beta, res.b_hat, data);
    res.se = se;
    res.se_ok = ok;
  }
  return res;
}

FitResult fit(const NlmeModel& model, const Dataset& data, const MixingFamily& family,
              const FitOptions& options) {
  auto [theta0, b0] = start_values(model, data, family, options);
  return fit_from(model, data, theta0, b0, options);
}

Mat numeric_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                    const Vec& h) {
  const int m = static_cast<int>(x.size());
  Mat H(m, m);
  const double f0 = f(x);
  for (int i = 0; i < m; ++i) {
    Vec xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
  }
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      Vec xpp = x, xpm = x, xmp = x, xmm = x;
      xpp[i] += h[i]; xpp[j] += h[j];
      xpm[i] += h[i]; xpm[j] -= h[j];
      xmp[i] -= h[i]; xmp[j] += h[j];
      xmm[i] -= h[i]; xmm[j] -= h[j];
      H(i, j) = H(j, i) = (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j]);
    }
  return H;
}

std::pair<Vec, bool> standard_errors(const NlmeModel& model, const Theta& theta,
                                     const Vec& beta_tilde,
                                     const std::vector<Vec>& b_tilde,
                                     const Dataset& data) {
  const int p = theta.p();
  const int q = theta.q();
  const int nd = q * (q + 1) / 2;
  const std::vector<LinearizedSubject> lin =
      linearize_all(model, theta, beta_tilde, b_tilde, data);
  Vec x(p + 1 + nd);
  x.head(p) = theta.beta;
  x[p] = std::log(theta.sigma2_e);
  x.tail(nd) = vech(theta.dhalf);
  auto f = [&](const Vec& v) {
    Theta t = theta;
    t.beta = v.head(p);
    t.sigma2_e = std::exp(v[p]);
    t.dhalf = unvech(v.tail(nd), q);
    try {
      return approx_loglik_t2(t, lin);
    } catch (const numeric_error&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  Vec h(x.size());
  for (int i = 0; i < x.size(); ++i) h[i] = 1e-4 * std::max(1.0, std::fabs(x[i]));
  const Mat H = numeric_hessian(f, x, h);
  if (!H.allFinite()) return {Vec(), false};
  Eigen::LLT<Mat> llt(Mat(-H));
  if (llt.info() != Eigen::Success) return {Vec(), false};
  const Mat cov = llt.solve(Mat::Identity(x.size(), x.size()));
  Vec se(x.size());
  for (int i = 0; i < x.size(); ++i) {
    if (cov(i, i) <= 0.0) return {Vec(), false};
    se[i] = std::sqrt(cov(i, i));
  }
  se[p] *= theta.sigma2_e;  // delta method for sigma2 = exp(log sigma2)
  return {se, true};
}

}  // namespace smsn
