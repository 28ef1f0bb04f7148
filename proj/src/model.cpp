#include "smsn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace smsn {

double safe_exp(double x) { return std::exp(std::clamp(x, -700.0, 700.0)); }

namespace {

Vec full_phi(const NlmeModel& model, const Vec& beta, const Vec& b,
             const SubjectData& subject) {
  if (beta.size() != model.p) throw std::invalid_argument("beta size != p");
  if (b.size() != model.q) throw std::invalid_argument("b size != q");
  return beta + subject.A.transpose() * b;
}

Mat fd_jacobian(const NlmeModel& model, const Vec& phi, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  Mat J(n, model.p);
  Vec ph = phi;
  for (int j = 0; j < model.p; ++j) {
    const double h = std::max(1e-6, 1e-6 * std::fabs(phi[j]));
    ph[j] = phi[j] + h;
    const Vec up = model.eta(ph, X);
    ph[j] = phi[j] - h;
    const Vec dn = model.eta(ph, X);
    ph[j] = phi[j];
    J.col(j) = (up - dn) / (2.0 * h);
  }
  return J;
}

// --- logistic growth: y = phi1 / (1 + exp(-(t - phi2)/phi3)), b on phi1 ---

Vec logistic3_eta(const Vec& phi, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  Vec out(n);
  for (int i = 0; i < n; ++i)
    out[i] = phi[0] / (1.0 + safe_exp(-(X(i, 0) - phi[1]) / phi[2]));
  return out;
}

Mat logistic3_jac(const Vec& phi, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  Mat J(n, 3);
  for (int i = 0; i < n; ++i) {
    const double s = (X(i, 0) - phi[1]) / phi[2];
    const double e = safe_exp(-s);
    const double den = 1.0 + e;
    J(i, 0) = 1.0 / den;
    J(i, 1) = -phi[0] * e / (phi[2] * den * den);
    J(i, 2) = -phi[0] * e * s / (phi[2] * den * den);
  }
  return J;
}

Vec logistic3_start(const Dataset& data) {
  double ymax = 0.0, tmin = 0.0, tmax = 0.0;
  bool first = true;
  std::vector<double> all_t;
  for (const auto& s : data.subjects) {
    ymax = std::max(ymax, s.y.maxCoeff());
    for (int i = 0; i < s.X.rows(); ++i) {
      const double t = s.X(i, 0);
      if (first || t < tmin) tmin = t;
      if (first || t > tmax) tmax = t;
      first = false;
      all_t.push_back(t);
    }
  }
  std::nth_element(all_t.begin(), all_t.begin() + all_t.size() / 2, all_t.end());
  Vec beta(3);
  beta << ymax, all_t[all_t.size() / 2], std::max((tmax - tmin) / 4.0, 1e-3);
  return beta;
}

// --- one-compartment oral absorption, log parameters ---
// y = D exp(-phi1 + phi2 + phi3) / (exp(phi2) - exp(phi3))
//       * (exp(-exp(phi3) t) - exp(-exp(phi2) t)),  b on (phi1, phi2)

double oral_denom(double ka, double ke) {
  double den = ka - ke;
  if (std::fabs(den) < 1e-12) den = den < 0.0 ? -1e-12 : 1e-12;
  return den;
}

Vec oral1cpt_eta(const Vec& phi, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  const double ka = safe_exp(phi[1]), ke = safe_exp(phi[2]);
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    const double t = X(i, 0), dose = X(i, 1);
    const double g = dose * safe_exp(phi[1] + phi[2] - phi[0]) / oral_denom(ka, ke);
    out[i] = g * (safe_exp(-ke * t) - safe_exp(-ka * t));
  }
  return out;
}

Mat oral1cpt_jac(const Vec& phi, const Mat& X) {
  const int n = static_cast<int>(X.rows());
  const double ka = safe_exp(phi[1]), ke = safe_exp(phi[2]);
  const double den = oral_denom(ka, ke);
  Mat J(n, 3);
  for (int i = 0; i < n; ++i) {
    const double t = X(i, 0), dose = X(i, 1);
    const double g = dose * safe_exp(phi[1] + phi[2] - phi[0]) / den;
    const double T = safe_exp(-ke * t) - safe_exp(-ka * t);
    J(i, 0) = -g * T;
    J(i, 1) = g * (-ke / den * T + t * ka * safe_exp(-ka * t));
    J(i, 2) = g * (ka / den * T - t * ke * safe_exp(-ke * t));
  }
  return J;
}

// non-compartmental heuristics: ke from the terminal log-slope, ka from the
// time to peak, Cl from dose over trapezoidal AUC
Vec oral1cpt_start(const Dataset& data) {
  double ke_sum = 0.0, tpeak_sum = 0.0, cl_sum = 0.0;
  int ke_n = 0, cl_n = 0;
  for (const auto& s : data.subjects) {
    const int n = static_cast<int>(s.y.size());
    if (n < 3) continue;
    int ipk = 0;
    for (int i = 1; i < n; ++i)
      if (s.y[i] > s.y[ipk]) ipk = i;
    tpeak_sum += std::max(s.X(ipk, 0), 0.1);
    // slope of log y over the last three positive observations
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (int i = std::max(ipk + 1, n - 3); i < n; ++i) {
      if (s.y[i] <= 0.0) continue;
      const double t = s.X(i, 0), ly = std::log(s.y[i]);
      sx += t; sy += ly; sxx += t * t; sxy += t * ly;
      ++m;
    }
    if (m >= 2) {
      const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
      if (slope < -1e-6) {
        ke_sum += -slope;
        ++ke_n;
      }
    }
    // trapezoidal AUC
    double auc = 0.0;
    for (int i = 1; i < n; ++i)
      auc += 0.5 * (s.y[i] + s.y[i - 1]) * (s.X(i, 0) - s.X(i - 1, 0));
    if (auc > 0.0) {
      cl_sum += s.X(0, 1) / auc;
      ++cl_n;
    }
  }
  const double ke = ke_n > 0 ? ke_sum / ke_n : 0.1;
  const double tpeak = tpeak_sum / std::max<std::size_t>(data.subjects.size(), 1);
  const double ka = std::max(2.0 / tpeak, 2.0 * ke);
  const double cl = cl_n > 0 ? cl_sum / cl_n : 0.1;
  Vec beta(3);
  beta << std::log(cl), std::log(ka), std::log(ke);
  return beta;
}

// --- linear mixed model, random intercept and slope: eta = X phi ---

Vec linear2_eta(const Vec& phi, const Mat& X) { return X * phi; }
Mat linear2_jac(const Vec& phi, const Mat& X) {
  (void)phi;
  return X;
}

Vec linear2_start(const Dataset& data) {
  Mat xtx = Mat::Zero(2, 2);
  Vec xty = Vec::Zero(2);
  for (const auto& s : data.subjects) {
    const Mat X = s.X.leftCols(2);
    xtx += X.transpose() * X;
    xty += X.transpose() * s.y;
  }
  return xtx.ldlt().solve(xty);
}

std::map<std::string, NlmeModel> make_builtins() {
  std::map<std::string, NlmeModel> m;
  {
    NlmeModel mod;
    mod.name = "logistic3";
    mod.p = 3;
    mod.q = 1;
    mod.x_cols = 1;
    mod.eta = logistic3_eta;
    mod.eta_jac = logistic3_jac;
    mod.design = [](const SubjectData&) {
      Mat A(1, 3);
      A << 1, 0, 0;
      return A;
    };
    mod.start = logistic3_start;
    m[mod.name] = mod;
  }
  {
    NlmeModel mod;
    mod.name = "oral1cpt";
    mod.p = 3;
    mod.q = 2;
    mod.x_cols = 2;
    mod.eta = oral1cpt_eta;
    mod.eta_jac = oral1cpt_jac;
    mod.design = [](const SubjectData&) {
      Mat A(2, 3);
      A << 1, 0, 0, 0, 1, 0;
      return A;
    };
    mod.start = oral1cpt_start;
    m[mod.name] = mod;
  }
  {
    NlmeModel mod;
    mod.name = "linear2";
    mod.p = 2;
    mod.q = 2;
    mod.x_cols = 2;
    mod.eta = linear2_eta;
    mod.eta_jac = linear2_jac;
    mod.design = [](const SubjectData&) { return Mat::Identity(2, 2); };
    mod.start = linear2_start;
    m[mod.name] = mod;
  }
  return m;
}

const std::map<std::string, NlmeModel>& builtins() {
  static const std::map<std::string, NlmeModel> m = make_builtins();
  return m;
}

}  // namespace

Vec eval_eta(const NlmeModel& model, const Vec& beta, const Vec& b,
             const SubjectData& subject) {
  return model.eta(full_phi(model, beta, b, subject), subject.X);
}

std::pair<Mat, Mat> jacobians(const NlmeModel& model, const Vec& beta, const Vec& b,
                              const SubjectData& subject) {
  const Vec phi = full_phi(model, beta, b, subject);
  const Mat W = model.eta_jac ? model.eta_jac(phi, subject.X)
                              : fd_jacobian(model, phi, subject.X);
  return {W * subject.A.transpose(), W};
}

const NlmeModel& builtin_model(const std::string& name) {
  auto it = builtins().find(name);
  if (it == builtins().end())
    throw std::invalid_argument("unknown model '" + name + "'");
  return it->second;
}

std::vector<std::string> builtin_model_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : builtins()) names.push_back(k);
  return names;
}

}  // namespace smsn
