#pragma once

#include <vector>

#include "smsn/emfit.hpp"

namespace smsn {

struct HealyData {
  Vec nominal;      // i/n
  Vec theoretical;  // F_d(d_(i)), pooled over subjects and sorted
};

// cdf of the Mahalanobis distance under the fitted family: d | U=u ~ u^{-1}
// chi^2_{n_i}, mixed over the family's mixing law.
double mahalanobis_cdf(const MixingFamily& family, double x, int ni);

HealyData healy_data(const NlmeModel& model, const FitResult& fit, const Dataset& data);

struct QqColumn {
  Vec sample_q;  // ordered EB estimates
  Vec normal_q;  // standard normal quantiles at (i - 1/2)/n
  bool degenerate = false;  // zero sample variance
};

std::vector<QqColumn> qq_data(const std::vector<Vec>& b_hat);

}  // namespace smsn
