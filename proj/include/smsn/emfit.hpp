#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "smsn/linearize.hpp"
#include "smsn/model.hpp"
#include "smsn/theta.hpp"

namespace smsn {

struct FitOptions {
  int max_iter = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  bool fix_nu = false;
  int nu_update_every = 1;  // run CM-step 5 every k-th iteration
  bool compute_se = true;
  int threads = 1;
};

// Per-subject E-step conditional moments and the workspace they come from.
struct EStepQuantities {
  double u_hat = 1.0;
  double tau1 = 0.0;
  double ut = 0.0;    // E{U T | y}
  double ut2 = 0.0;   // E{U T^2 | y}
  Vec ub;             // E{U b | y}
  Vec utb;            // E{U T b | y}
  Mat ubb;            // E{U b b' | y}
  double M = 1.0;
  double mu = 0.0;
  Mat B;
  Vec s;
  Vec r;
  Mat Omega;
};

struct TraceEntry {
  double loglik;
  Vec theta;  // flattened
};

struct FitResult {
  Theta theta;
  std::vector<Vec> b_hat;
  double loglik = 0.0;
  double aic = 0.0;
  Vec se;          // for (beta, sigma2_e, vech dhalf); empty when not computed
  bool se_ok = false;
  std::vector<TraceEntry> trace;
  int iterations = 0;
  bool converged = false;
  bool nu_at_bound = false;
  int n_free = 0;
};

double aic(double loglik, int n_free);
int free_param_count(const NlmeModel& model, const MixingFamily& family, bool fix_nu);

// Gaussian pre-fit based starting values: N-NLME fit, lambda0 = 3 sign(skewness
// of the EB effects), family-specific nu0.
std::pair<Theta, std::vector<Vec>> start_values(const NlmeModel& model,
                                                const Dataset& data,
                                                const MixingFamily& family,
                                                const FitOptions& options);

std::vector<EStepQuantities> estep(const Theta& theta,
                                   const std::vector<LinearizedSubject>& lin);

// CM-steps 1-4 (beta, sigma2_e, Delta, Gamma -> D, lambda)
Theta cm_update(const Theta& theta, const std::vector<EStepQuantities>& E,
                const std::vector<LinearizedSubject>& lin);

// CM-step 5 (ECME): profile the Theorem-2 log-likelihood over nu on the
// family's domain. Returns the updated family and whether a bound was hit.
std::pair<MixingFamily, bool> update_nu(const Theta& theta,
                                        const std::vector<LinearizedSubject>& lin);

std::vector<Vec> empirical_bayes(const Theta& theta,
                                 const std::vector<LinearizedSubject>& lin);

FitResult fit(const NlmeModel& model, const Dataset& data, const MixingFamily& family,
              const FitOptions& options = {});

// Same loop, starting from a caller-supplied state (used for warm starts).
FitResult fit_from(const NlmeModel& model, const Dataset& data, const Theta& theta0,
                   const std::vector<Vec>& b0, const FitOptions& options);

// Central-difference Hessian of f at x with per-coordinate steps h.
Mat numeric_hessian(const std::function<double(const Vec&)>& f, const Vec& x,
                    const Vec& h);

// SEs for (beta, sigma2_e, vech dhalf) from the numerical observed information
// of the Theorem-2 log-likelihood in (beta, log sigma2_e, vech dhalf), holding
// b_tilde, lambda, nu fixed. Second element reports whether -H was PD.
std::pair<Vec, bool> standard_errors(const NlmeModel& model, const Theta& theta,
                                     const Vec& beta_tilde,
                                     const std::vector<Vec>& b_tilde,
                                     const Dataset& data);

}  // namespace smsn
