#pragma once

#include <string>

#include "smsn/model.hpp"

namespace smsn {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Long-format CSV with header "subject,time,y[,dose,...]". Rows are grouped
// by subject and ordered by time; subject order is numeric when every id
// parses as a number, lexicographic otherwise. X holds (time, extras...).
Dataset ingest_long_csv(const std::string& path);

// Attach a model's design matrices; validates covariate arity.
void bind_model(Dataset& data, const NlmeModel& model);

void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace smsn
