#pragma once

#include <string>
#include <vector>

#include "smsn/emfit.hpp"

namespace smsn {

struct PredictionRequest {
  std::string subject_id;
  Mat X_plus;  // upsilon x r future covariates
};

// Minimum-MSE predictor of the future response block, expanded at the
// last-iteration random-effect estimate of the fit.
Vec predict_future(const NlmeModel& model, const FitResult& fit,
                   const PredictionRequest& req, const Dataset& data);

// mean of |(y_p - yhat_p) / y_p|
double mard(const Vec& actual, const Vec& predicted);

struct HoldoutCell {
  std::string family;
  int k = 0;
  double mean_mard = 0.0;
  bool ok = false;
};

// Drop the last k observations of every subject (k = 1..k_max), refit per
// family (warm-started from the full-data fit), predict the deleted block,
// average MARD over subjects.
std::vector<HoldoutCell> holdout_study(const NlmeModel& model, const Dataset& data,
                                       const std::vector<MixingFamily>& families,
                                       int k_max, const FitOptions& options);

}  // namespace smsn
