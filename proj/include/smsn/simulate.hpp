#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smsn/emfit.hpp"

namespace smsn {

// stream-splitting for per-replicate seeds
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Draws from the SMSN-NLME hierarchy: U_i ~ H, b_i|U ~ SN(c Delta, u^{-1} D,
// lambda), eps_i|U ~ N(0, sigma2 u^{-1} I), y = eta(beta + A'b, X) + eps.
// Every subject shares the design matrix X.
Dataset simulate_dataset(const NlmeModel& model, const Theta& theta_true, const Mat& X,
                         int n_subjects, std::uint64_t seed);

struct McConfig {
  std::string model_name = "logistic3";
  Theta theta_true;
  std::vector<MixingFamily> fit_families;
  int n_subjects = 25;
  int n_replicates = 100;
  std::uint64_t seed = 20210;
  Mat X;  // shared design
  FitOptions fit_options;
};

struct McRow {
  std::string family;
  std::string param;
  double mean = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double coverage95 = std::numeric_limits<double>::quiet_NaN();
};

struct McReport {
  std::vector<McRow> rows;
  std::map<std::string, int> aic_pref;  // family -> times preferred
  int n_replicates = 0;
  int failures = 0;

  const McRow* find(const std::string& family, const std::string& param) const {
    for (const auto& r : rows)
      if (r.family == family && r.param == param) return &r;
    return nullptr;
  }
};

McReport run_mc_study(const McConfig& config);

void write_mc_report_csv(const McReport& report, const std::string& path);

}  // namespace smsn
