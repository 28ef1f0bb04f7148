#include "smsn/predict.hpp"

#include <algorithm>
#include <future>
#include <thread>

namespace smsn {

Vec predict_future(const NlmeModel& model, const FitResult& fit,
                   const PredictionRequest& req, const Dataset& data) {
  if (req.X_plus.rows() < 1) throw std::invalid_argument("X_plus must have rows");
  const SubjectData* subject = nullptr;
  std::size_t idx = 0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i)
    if (data.subjects[i].id == req.subject_id) {
      subject = &data.subjects[i];
      idx = i;
      break;
    }
  if (!subject) throw std::invalid_argument("unknown subject '" + req.subject_id + "'");

  const Theta& theta = fit.theta;
  const Theta::Derived d = theta.derived();
  const Vec& bt = fit.b_hat[idx];
  const int n = static_cast<int>(subject->y.size());
  const int ups = static_cast<int>(req.X_plus.rows());
  const int q = theta.q();

  SubjectData fut = *subject;
  fut.X = req.X_plus;
  auto [H, W] = jacobians(model, theta.beta, bt, *subject);
  auto [Hp, Wp] = jacobians(model, theta.beta, bt, fut);
  (void)W;
  (void)Wp;
  Mat Hstar(n + ups, q);
  Hstar << H, Hp;

  Mat psi_star = Hstar * d.D * Hstar.transpose();
  psi_star.diagonal().array() += theta.sigma2_e;
  const Mat psi11 = psi_star.topLeftCorner(n, n);
  const Mat psi12 = psi_star.topRightCorner(n, ups);
  const Mat psi21 = psi_star.bottomLeftCorner(ups, n);
  const Mat psi22 = psi_star.bottomRightCorner(ups, ups);
  Eigen::LLT<Mat> llt11 = chol_pd(psi11, "Psi*_11");

  const Vec eta_obs = eval_eta(model, theta.beta, bt, *subject);
  const Vec eta_plus = eval_eta(model, theta.beta, bt, fut);
  const Vec shift = bt - d.c * d.Delta;
  const Vec resid1 = subject->y - eta_obs + H * shift;  // y - marginal center
  const Vec mu21 = eta_plus - Hp * shift + psi21 * llt11.solve(resid1);
  if (!theta.family.skewed() || theta.lambda.isZero(0.0)) return mu21;

  const Mat psi221 = psi22 - psi21 * llt11.solve(psi12);
  Eigen::LLT<Mat> dllt = chol_pd(d.D, "D");
  Mat lam_inv = dllt.solve(Mat::Identity(q, q)) +
                Hstar.transpose() * Hstar / theta.sigma2_e;
  const Mat lam_star = chol_pd(lam_inv, "Lambda* inverse").solve(Mat::Identity(q, q));
  // Psi*^{-1/2} lambda_bar* = Psi*^{-1} H* D zeta / sqrt(1 + zeta' Lambda* zeta)
  Eigen::LLT<Mat> llt_star = chol_pd(psi_star, "Psi*");
  const Vec ups_vec = llt_star.solve(Hstar * (d.D * d.zeta)) /
                      std::sqrt(1.0 + d.zeta.dot(lam_star * d.zeta));
  const Vec u1 = ups_vec.head(n);
  const Vec u2 = ups_vec.tail(ups);
  const double denom2 = std::sqrt(1.0 + u2.dot(psi221 * u2));
  const Vec ups_tilde = (u1 + llt11.solve(psi12 * u2)) / denom2;
  const double A = ups_tilde.dot(resid1);
  const double tau_neg1 =
      mixing_expectations_core(theta.family, resid1.dot(llt11.solve(resid1)), n, A)
          .tau_neg1;
  return mu21 + (psi221 * u2) / denom2 * tau_neg1;
}

double mard(const Vec& actual, const Vec& predicted) {
  if (actual.size() != predicted.size())
    throw std::invalid_argument("mard: size mismatch");
  if (actual.size() == 0) throw std::invalid_argument("mard: empty vectors");
  double acc = 0.0;
  for (int i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw std::domain_error("mard: zero actual value");
    acc += std::fabs((actual[i] - predicted[i]) / actual[i]);
  }
  return acc / actual.size();
}

namespace {

Dataset truncate_last(const Dataset& data, int k) {
  Dataset out;
  out.subjects.reserve(data.subjects.size());
  for (const auto& s : data.subjects) {
    const int keep = static_cast<int>(s.y.size()) - k;
    SubjectData t = s;
    t.y = s.y.head(keep);
    t.X = s.X.topRows(keep);
    out.subjects.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::vector<HoldoutCell> holdout_study(const NlmeModel& model, const Dataset& data,
                                       const std::vector<MixingFamily>& families,
                                       int k_max, const FitOptions& options) {
  std::vector<HoldoutCell> cells;
  if (k_max <= 0) return cells;
  for (const auto& s : data.subjects)
    if (s.y.size() <= k_max)
      throw std::invalid_argument("holdout: subject " + s.id + " has too few points");

  struct Task {
    std::size_t fam;
    int k;
  };
  std::vector<Task> tasks;
  for (std::size_t f = 0; f < families.size(); ++f)
    for (int k = 1; k <= k_max; ++k) tasks.push_back({f, k});

  // full-data fits used as warm starts
  std::vector<FitResult> full;
  for (const auto& fam : families) {
    FitOptions o = options;
    o.compute_se = false;
    full.push_back(fit(model, data, fam, o));
  }

  cells.resize(tasks.size());
  auto run_task = [&](std::size_t ti) {
    const Task& t = tasks[ti];
    HoldoutCell cell;
    cell.family = families[t.fam].name();
    cell.k = t.k;
    try {
      const Dataset sub = truncate_last(data, t.k);
      FitOptions o = options;
      o.compute_se = false;
      FitResult fres = fit_from(model, sub, full[t.fam].theta, full[t.fam].b_hat, o);
      double acc = 0.0;
      int cnt = 0;
      for (std::size_t i = 0; i < data.subjects.size(); ++i) {
        const auto& s = data.subjects[i];
        const int keep = static_cast<int>(s.y.size()) - t.k;
        PredictionRequest req{s.id, s.X.bottomRows(t.k)};
        const Vec pred = predict_future(model, fres, req, sub);
        acc += mard(s.y.tail(t.k), pred);
        ++cnt;
      }
      cell.mean_mard = acc / cnt;
      cell.ok = true;
    } catch (const std::exception&) {
      cell.ok = false;
    }
    cells[ti] = cell;
  };

  const int nthreads = std::max(1, options.threads);
  if (nthreads == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
          run_task(i);
      });
    for (auto& th : pool) th.join();
  }
  return cells;
}

}  // namespace smsn
