#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "smsn/linalg.hpp"

namespace smsn {

struct SubjectData {
  std::string id;
  Vec y;   // n_i responses
  Mat X;   // n_i x r covariates (time first, then dose, ...)
  Mat A;   // q x p design, set when a model is bound
};

struct Dataset {
  std::vector<SubjectData> subjects;
  int n_subjects() const { return static_cast<int>(subjects.size()); }
  int n_obs() const {
    int n = 0;
    for (const auto& s : subjects) n += static_cast<int>(s.y.size());
    return n;
  }
};

// Nonlinear mean function eta(phi, X) with phi = beta + A' b: the design A
// (q x p) embeds the q random effects into the p individual parameters.
// eta_jac returns d eta / d phi' (n_i x p); omit it to get central finite
// differences with step max(1e-6, 1e-6|x|).
struct NlmeModel {
  std::string name;
  int p = 0;
  int q = 0;
  int x_cols = 1;
  std::function<Vec(const Vec& phi, const Mat& X)> eta;
  std::function<Mat(const Vec& phi, const Mat& X)> eta_jac;
  std::function<Mat(const SubjectData&)> design;
  std::function<Vec(const Dataset&)> start;  // coarse beta heuristic
};

Vec eval_eta(const NlmeModel& model, const Vec& beta, const Vec& b,
             const SubjectData& subject);

// (H, W): H = d eta / d b' (n_i x q), W = d eta / d beta' (n_i x p), both at
// (beta, b); H = W A'.
std::pair<Mat, Mat> jacobians(const NlmeModel& model, const Vec& beta, const Vec& b,
                              const SubjectData& subject);

const NlmeModel& builtin_model(const std::string& name);
std::vector<std::string> builtin_model_names();

// exp with the argument clamped to +-700
double safe_exp(double x);

}  // namespace smsn
