#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace smsn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Symmetric (spectral) square root of a symmetric PSD matrix.
inline Mat sym_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
  Vec ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0.0) {
      if (ev[i] < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
        throw numeric_error("matrix is not positive semidefinite");
      ev[i] = 0.0;
    }
  }
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

inline Mat sym_inv_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> es(m);
  if (es.info() != Eigen::Success) throw numeric_error("eigendecomposition failed");
  const Vec& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) throw numeric_error("matrix is not positive definite");
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Eigen::LLT<Mat> chol_pd(const Mat& m, const char* what) {
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw numeric_error(std::string(what) + ": Cholesky failed, matrix not PD");
  return llt;
}

inline double logdet_from_llt(const Eigen::LLT<Mat>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Solver for Psi = sigma2*I + H D H^T. Uses the Woodbury identity when
// n > 3q, dense Cholesky otherwise. Both paths agree to roundoff (tested).
class PsiSolver {
 public:
  PsiSolver(const Mat& H, const Mat& D, double sigma2) {
    const int n = static_cast<int>(H.rows());
    const int q = static_cast<int>(H.cols());
    woodbury_ = n > 3 * q;
    sigma2_ = sigma2;
    if (sigma2 <= 0.0) throw numeric_error("PsiSolver: sigma2 must be positive");
    if (woodbury_) {
      H_ = H;
      // K = sigma2 D^{-1} + H^T H  (q x q)
      Eigen::LLT<Mat> dllt = chol_pd(D, "PsiSolver D");
      Mat K = sigma2 * dllt.solve(Mat::Identity(q, q)) + H.transpose() * H;
      kllt_ = chol_pd(K, "PsiSolver capacitance");
      // log|Psi| = n log s2 + log|I_q + D H^T H / s2| = n log s2 + log|K| - log|s2 D^{-1}|
      const double logdetD = logdet_from_llt(dllt);
      logdet_ = n * std::log(sigma2) + logdet_from_llt(kllt_) -
                (q * std::log(sigma2) - logdetD);
    } else {
      Mat psi = H * D * H.transpose();
      psi.diagonal().array() += sigma2;
      llt_ = chol_pd(psi, "Psi");
      logdet_ = logdet_from_llt(llt_);
    }
  }

  explicit PsiSolver(const Mat& psi) {
    woodbury_ = false;
    sigma2_ = 0.0;
    llt_ = chol_pd(psi, "Psi");
    logdet_ = logdet_from_llt(llt_);
  }

  Vec solve(const Vec& x) const {
    if (!woodbury_) return llt_.solve(x);
    return (x - H_ * kllt_.solve(H_.transpose() * x)) / sigma2_;
  }

  Mat solve(const Mat& x) const {
    if (!woodbury_) return llt_.solve(x);
    return (x - H_ * kllt_.solve(H_.transpose() * x)) / sigma2_;
  }

  double quad(const Vec& x) const { return x.dot(solve(x)); }
  double logdet() const { return logdet_; }

 private:
  bool woodbury_;
  double sigma2_;
  double logdet_;
  Mat H_;
  Eigen::LLT<Mat> llt_;
  Eigen::LLT<Mat> kllt_;
};

}  // namespace smsn
