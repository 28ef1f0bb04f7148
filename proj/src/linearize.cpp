#include "smsn/linearize.hpp"

namespace smsn {

LinearizedSubject linearize_subject(const NlmeModel& model, const Theta& theta,
                                    const Vec& beta_tilde, const Vec& b_tilde,
                                    const SubjectData& subject) {
  const Theta::Derived d = theta.derived();
  LinearizedSubject out;
  out.n = static_cast<int>(subject.y.size());
  auto [H, W] = jacobians(model, beta_tilde, b_tilde, subject);
  out.H = std::move(H);
  out.W = std::move(W);
  const Vec eta0 = eval_eta(model, beta_tilde, b_tilde, subject);
  // etatilde = eta0 - H b_tilde - W beta_tilde;  ytilde = y - etatilde
  out.ytilde = subject.y - (eta0 - out.H * b_tilde - out.W * beta_tilde);
  out.psi = out.H * d.D * out.H.transpose();
  out.psi.diagonal().array() += theta.sigma2_e;
  out.psi_solver = std::make_shared<PsiSolver>(out.H, d.D, theta.sigma2_e);
  Eigen::LLT<Mat> dllt = chol_pd(d.D, "D");
  const int q = theta.q();
  Mat lam_inv = dllt.solve(Mat::Identity(q, q)) +
                out.H.transpose() * out.H / theta.sigma2_e;
  out.Lambda = chol_pd(lam_inv, "Lambda inverse").solve(Mat::Identity(q, q));
  out.skew_dir = out.H * (d.D * d.zeta);
  out.skew_denom = std::sqrt(1.0 + d.zeta.dot(out.Lambda * d.zeta));
  // marginal center of the working response ytilde (Theorem 2)
  out.center = out.W * theta.beta + d.c * (out.H * d.Delta);
  return out;
}

std::vector<LinearizedSubject> linearize_all(const NlmeModel& model, const Theta& theta,
                                             const Vec& beta_tilde,
                                             const std::vector<Vec>& b_tilde,
                                             const Dataset& data) {
  std::vector<LinearizedSubject> out;
  out.reserve(data.subjects.size());
  for (std::size_t i = 0; i < data.subjects.size(); ++i)
    out.push_back(
        linearize_subject(model, theta, beta_tilde, b_tilde[i], data.subjects[i]));
  return out;
}

double approx_loglik(const NlmeModel& model, const Theta& theta,
                     const std::vector<Vec>& b_tilde, const Dataset& data) {
  const Theta::Derived d = theta.derived();
  double ll = 0.0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const SubjectData& sub = data.subjects[i];
    const Vec& bt = b_tilde[i];
    auto [H, W] = jacobians(model, theta.beta, bt, sub);
    (void)W;
    const Vec center = eval_eta(model, theta.beta, bt, sub) - H * (bt - d.c * d.Delta);
    const Vec resid = sub.y - center;
    PsiSolver psi(H, d.D, theta.sigma2_e);
    Eigen::LLT<Mat> dllt = chol_pd(d.D, "D");
    Mat lam_inv = dllt.solve(Mat::Identity(theta.q(), theta.q())) +
                  H.transpose() * H / theta.sigma2_e;
    Mat Lambda = chol_pd(lam_inv, "Lambda inverse").solve(
        Mat::Identity(theta.q(), theta.q()));
    const double denom = std::sqrt(1.0 + d.zeta.dot(Lambda * d.zeta));
    const double A = (H * (d.D * d.zeta)).dot(psi.solve(resid)) / denom;
    ll += smsn_logpdf_core(psi.quad(resid), psi.logdet(),
                           static_cast<int>(sub.y.size()), A, theta.family);
  }
  return ll;
}

double approx_loglik_t2(const Theta& theta, const std::vector<LinearizedSubject>& lin) {
  const Theta::Derived d = theta.derived();
  const int q = theta.q();
  double ll = 0.0;
  for (const auto& l : lin) {
    PsiSolver psi(l.H, d.D, theta.sigma2_e);
    Eigen::LLT<Mat> dllt = chol_pd(d.D, "D");
    Mat lam_inv =
        dllt.solve(Mat::Identity(q, q)) + l.H.transpose() * l.H / theta.sigma2_e;
    Mat Lambda = chol_pd(lam_inv, "Lambda inverse").solve(Mat::Identity(q, q));
    const double denom = std::sqrt(1.0 + d.zeta.dot(Lambda * d.zeta));
    const Vec resid = l.ytilde - l.W * theta.beta - d.c * (l.H * d.Delta);
    const double A = (l.H * (d.D * d.zeta)).dot(psi.solve(resid)) / denom;
    ll += smsn_logpdf_core(psi.quad(resid), psi.logdet(), l.n, A, theta.family);
  }
  return ll;
}

Vec mahalanobis(const NlmeModel& model, const Theta& theta,
                const std::vector<Vec>& b_tilde, const Dataset& data) {
  const Theta::Derived d = theta.derived();
  Vec out(data.n_subjects());
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const SubjectData& sub = data.subjects[i];
    const Vec& bt = b_tilde[i];
    auto [H, W] = jacobians(model, theta.beta, bt, sub);
    (void)W;
    const Vec center = eval_eta(model, theta.beta, bt, sub) - H * (bt - d.c * d.Delta);
    PsiSolver psi(H, d.D, theta.sigma2_e);
    out[static_cast<int>(i)] = psi.quad(sub.y - center);
  }
  return out;
}

}  // namespace smsn
