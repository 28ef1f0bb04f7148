#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smsn/families.hpp"

namespace smsn {

struct RunConfig {
  std::string command;            // fit | simulate | predict | diagnose
  std::string input;              // CSV path (fit/predict/diagnose)
  std::string model = "oral1cpt";
  std::string family = "normal";  // normal|sn|st|ssl|scn
  std::vector<double> nu;         // family-specific, optional
  double tol = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 20210;
  bool fix_nu = false;
  int holdout = 5;
  int threads = 0;                // 0 = hardware
  std::string out_dir = "out";
  // simulate specifics
  int replicates = 100;
  int n_subjects = 25;
  std::string scenario = "st-medium";  // st-{small,medium,large} | sn
};

MixingFamily parse_family(const std::string& name, const std::vector<double>& nu);

// Executes one workflow, writing artifacts under config.out_dir.
// Returns a process exit status; failures also write error.json there.
int run(const RunConfig& config);

}  // namespace smsn
