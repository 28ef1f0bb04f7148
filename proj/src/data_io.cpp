#include "smsn/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace smsn {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) {
    // trim spaces and CR
    std::size_t a = cur.find_first_not_of(" \t\r");
    std::size_t b = cur.find_last_not_of(" \t\r");
    out.push_back(a == std::string::npos ? std::string() : cur.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_num(const std::string& s, int lineno, const std::string& col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw parse_error("line " + std::to_string(lineno) + ": non-numeric value '" + s +
                      "' in column " + col);
  }
}

}  // namespace

Dataset ingest_long_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty file '" + path + "'");
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "subject" || header[1] != "time" ||
      header[2] != "y")
    throw parse_error("header must start with subject,time,y");
  const int extras = static_cast<int>(header.size()) - 3;

  struct Row {
    double time;
    double y;
    std::vector<double> x;
  };
  std::map<std::string, std::vector<Row>> groups;
  std::vector<std::string> order;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw parse_error("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(header.size()) + " cells, got " +
                        std::to_string(cells.size()));
    if (cells[0].empty())
      throw parse_error("line " + std::to_string(lineno) + ": empty subject id");
    Row r;
    r.time = parse_num(cells[1], lineno, "time");
    r.y = parse_num(cells[2], lineno, "y");
    for (int e = 0; e < extras; ++e)
      r.x.push_back(parse_num(cells[3 + e], lineno, header[3 + e]));
    if (groups.find(cells[0]) == groups.end()) order.push_back(cells[0]);
    groups[cells[0]].push_back(std::move(r));
  }
  if (groups.empty()) throw parse_error("no data rows in '" + path + "'");

  // deterministic subject order: numeric when possible
  const bool all_numeric = std::all_of(order.begin(), order.end(), [](const auto& s) {
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end && *end == '\0';
  });
  std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    if (all_numeric) return std::stod(a) < std::stod(b);
    return a < b;
  });

  Dataset data;
  for (const auto& id : order) {
    auto& rows = groups[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.time < b.time; });
    SubjectData s;
    s.id = id;
    const int n = static_cast<int>(rows.size());
    s.y.resize(n);
    s.X.resize(n, 1 + extras);
    for (int i = 0; i < n; ++i) {
      s.y[i] = rows[i].y;
      s.X(i, 0) = rows[i].time;
      for (int e = 0; e < extras; ++e) s.X(i, 1 + e) = rows[i].x[e];
    }
    data.subjects.push_back(std::move(s));
  }
  return data;
}

void bind_model(Dataset& data, const NlmeModel& model) {
  for (auto& s : data.subjects) {
    if (s.X.cols() < model.x_cols)
      throw parse_error("model '" + model.name + "' needs " +
                        std::to_string(model.x_cols) + " covariate columns, data has " +
                        std::to_string(s.X.cols()));
    s.A = model.design(s);
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  int extras = data.subjects.empty() ? 0 : static_cast<int>(data.subjects[0].X.cols()) - 1;
  out << "subject,time,y";
  for (int e = 0; e < extras; ++e) out << ",x" << e + 1;
  out << '\n';
  out.precision(10);
  for (const auto& s : data.subjects)
    for (int i = 0; i < s.y.size(); ++i) {
      out << s.id << ',' << s.X(i, 0) << ',' << s.y[i];
      for (int e = 0; e < extras; ++e) out << ',' << s.X(i, 1 + e);
      out << '\n';
    }
}

}  // namespace smsn
