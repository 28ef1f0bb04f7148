#include "smsn/simulate.hpp"

#include <atomic>
#include <fstream>
#include <thread>

namespace smsn {

Dataset simulate_dataset(const NlmeModel& model, const Theta& theta_true, const Mat& X,
                         int n_subjects, std::uint64_t seed) {
  theta_true.validate();
  const Theta::Derived d = theta_true.derived();
  const int q = theta_true.q();
  const Mat dhalf = theta_true.dhalf;
  const Mat skew_half = sym_sqrt(Mat::Identity(q, q) - d.delta * d.delta.transpose());
  const double sig = std::sqrt(theta_true.sigma2_e);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset data;
  data.subjects.resize(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    SubjectData& s = data.subjects[i];
    s.id = std::to_string(i + 1);
    s.X = X;
    const double u = theta_true.family.draw_u(rng);
    const double root_u = std::sqrt(u);
    const double t0 = std::fabs(gauss(rng));
    Vec t1(q);
    for (int j = 0; j < q; ++j) t1[j] = gauss(rng);
    const Vec b = d.c * d.Delta + dhalf * (d.delta * t0 + skew_half * t1) / root_u;
    s.A = model.design(s);
    const Vec mean = eval_eta(model, theta_true.beta, b, s);
    s.y = mean;
    for (int j = 0; j < s.y.size(); ++j) s.y[j] += sig * gauss(rng) / root_u;
  }
  return data;
}

namespace {

struct RepOutcome {
  bool ok = false;
  std::vector<Vec> est;        // flattened theta per family
  std::vector<Vec> se;         // beta/sigma2/dhalf SEs per family (may be empty)
  std::vector<double> aic;
  std::vector<bool> se_ok;
};

std::vector<std::string> param_names(const NlmeModel& model,
                                     const MixingFamily& family) {
  std::vector<std::string> names;
  for (int i = 0; i < model.p; ++i) names.push_back("beta" + std::to_string(i + 1));
  names.push_back("sigma2_e");
  for (int i = 0; i < model.q; ++i)
    for (int j = 0; j <= i; ++j)
      names.push_back("d" + std::to_string(i + 1) + std::to_string(j + 1));
  for (int i = 0; i < model.q; ++i) names.push_back("lambda" + std::to_string(i + 1));
  for (int i = 0; i < family.nu_dim(); ++i)
    names.push_back("nu" + std::to_string(i + 1));
  return names;
}

}  // namespace

McReport run_mc_study(const McConfig& config) {
  const NlmeModel& model = builtin_model(config.model_name);
  const std::size_t nfam = config.fit_families.size();
  std::vector<RepOutcome> outcomes(config.n_replicates);

  auto run_rep = [&](int rep) {
    RepOutcome out;
    const std::uint64_t rep_seed = splitmix64(config.seed + 0x51ed2701ULL * (rep + 1));
    const Dataset data =
        simulate_dataset(model, config.theta_true, config.X, config.n_subjects, rep_seed);
    out.est.resize(nfam);
    out.se.resize(nfam);
    out.aic.resize(nfam);
    out.se_ok.resize(nfam);
    out.ok = true;
    for (std::size_t f = 0; f < nfam; ++f) {
      try {
        FitResult r = fit(model, data, config.fit_families[f], config.fit_options);
        if (!r.converged && r.iterations >= config.fit_options.max_iter) {
          // kept: best iterate is still a usable estimate, flag only on failure
        }
        if (!std::isfinite(r.loglik)) throw numeric_error("non-finite log-likelihood");
        out.est[f] = r.theta.flatten();
        out.se[f] = r.se;
        out.se_ok[f] = r.se_ok;
        out.aic[f] = r.aic;
      } catch (const std::exception&) {
        out.ok = false;
        return out;
      }
    }
    return out;
  };

  const int nthreads = std::max(1, config.fit_options.threads);
  if (nthreads == 1) {
    for (int rep = 0; rep < config.n_replicates; ++rep) outcomes[rep] = run_rep(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < config.n_replicates;
             rep = next.fetch_add(1))
          outcomes[rep] = run_rep(rep);
      });
    for (auto& th : pool) th.join();
  }

  McReport report;
  report.n_replicates = config.n_replicates;
  for (std::size_t f = 0; f < nfam; ++f)
    report.aic_pref[config.fit_families[f].name()] = 0;

  std::vector<const RepOutcome*> good;
  for (const auto& o : outcomes) {
    if (o.ok)
      good.push_back(&o);
    else
      ++report.failures;
  }
  if (good.empty()) return report;

  for (const auto* o : good) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < nfam; ++f)
      if (o->aic[f] < o->aic[best]) best = f;
    ++report.aic_pref[config.fit_families[best].name()];
  }

  for (std::size_t f = 0; f < nfam; ++f) {
    Theta truth = config.theta_true;
    truth.family = config.fit_families[f];
    if (!config.fit_families[f].skewed()) truth.lambda = Vec::Zero(model.q);
    const Vec true_flat = truth.flatten();
    const auto names = param_names(model, config.fit_families[f]);
    const int nse = model.p + 1 + model.q * (model.q + 1) / 2;
    for (std::size_t pi = 0; pi < names.size(); ++pi) {
      McRow row;
      row.family = config.fit_families[f].name();
      row.param = names[pi];
      double sum = 0.0, sse = 0.0;
      int cov_n = 0, cov_hit = 0;
      const double tv = true_flat[pi];
      for (const auto* o : good) {
        const double est = o->est[f][pi];
        sum += est;
        sse += (est - tv) * (est - tv);
        if (static_cast<int>(pi) < nse && o->se_ok[f] && o->se[f].size() == nse) {
          if (std::fabs(est - tv) <= 1.96 * o->se[f][static_cast<int>(pi)]) ++cov_hit;
          ++cov_n;
        }
      }
      row.mean = sum / good.size();
      row.bias = row.mean - tv;
      row.mse = sse / good.size();
      if (cov_n > 0) row.coverage95 = static_cast<double>(cov_hit) / cov_n;
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_mc_report_csv(const McReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "family,parameter,mean,bias,mse,coverage95\n";
  out.precision(6);
  for (const auto& r : report.rows) {
    out << r.family << ',' << r.param << ',' << r.mean << ',' << r.bias << ',' << r.mse
        << ',';
    if (std::isfinite(r.coverage95))
      out << r.coverage95;
    else
      out << "NA";
    out << '\n';
  }
}

}  // namespace smsn
