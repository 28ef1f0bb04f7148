#pragma once

#include <memory>
#include <vector>

#include "smsn/model.hpp"
#include "smsn/theta.hpp"

namespace smsn {

// Per-subject first-order Taylor artifacts around (beta_tilde, b_tilde):
// working response, Jacobians, the approximate SMSN marginal pieces and the
// solvers needed to evaluate them.
struct LinearizedSubject {
  int n = 0;
  Vec ytilde;       // y - etatilde, etatilde = eta(.) - H b_tilde - W beta_tilde
  Mat H;            // n x q
  Mat W;            // n x p
  Mat psi;          // H D H' + sigma2 I
  Mat Lambda;       // (D^{-1} + H'H/sigma2)^{-1}
  Vec skew_dir;     // H D zeta
  double skew_denom = 1.0;  // sqrt(1 + zeta' Lambda zeta)
  Vec center;       // Theorem-2 marginal center of ytilde at theta.beta
  std::shared_ptr<const PsiSolver> psi_solver;

  // skewness argument of the marginal at a given residual
  double skew_arg(const Vec& resid) const {
    return skew_dir.dot(psi_solver->solve(resid)) / skew_denom;
  }
  // lambda_bar (explicit vector; needs the symmetric root of psi)
  Vec lambda_bar() const { return sym_inv_sqrt(psi) * skew_dir / skew_denom; }
};

LinearizedSubject linearize_subject(const NlmeModel& model, const Theta& theta,
                                    const Vec& beta_tilde, const Vec& b_tilde,
                                    const SubjectData& subject);

std::vector<LinearizedSubject> linearize_all(const NlmeModel& model, const Theta& theta,
                                             const Vec& beta_tilde,
                                             const std::vector<Vec>& b_tilde,
                                             const Dataset& data);

// Theorem-1 approximate log-likelihood: expansion at (theta.beta, b_tilde).
double approx_loglik(const NlmeModel& model, const Theta& theta,
                     const std::vector<Vec>& b_tilde, const Dataset& data);

// Theorem-2 form on a fixed linearization: only (theta.beta, sigma2, D,
// lambda, nu) enter; H, W, ytilde stay at the expansion point.
double approx_loglik_t2(const Theta& theta, const std::vector<LinearizedSubject>& lin);

Vec mahalanobis(const NlmeModel& model, const Theta& theta,
                const std::vector<Vec>& b_tilde, const Dataset& data);

}  // namespace smsn
