#include "adaptivity/matrix_kernel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace adaptivity {

namespace {

constexpr double kSymTol = 1e-12;

double default_jitter(const Eigen::MatrixXd& a) {
  return 1e-12 * a.trace() / double(a.rows());
}

}  // namespace

PsdMatrix::PsdMatrix(Eigen::MatrixXd m) : mat_(std::move(m)) {
  if (mat_.rows() != mat_.cols() || mat_.rows() == 0) {
    throw NotPsdError("PsdMatrix: square non-empty matrix required");
  }
  double scale = std::max(1.0, mat_.cwiseAbs().maxCoeff());
  if (!mat_.allFinite()) {
    throw NotPsdError("PsdMatrix: non-finite entries");
  }
  if ((mat_ - mat_.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale) {
    throw NotPsdError("PsdMatrix: input is not symmetric");
  }
  mat_ = 0.5 * (mat_ + mat_.transpose().eval());
}

void PsdMatrix::validate() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mat_, Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (lo < -1e-10 * std::max(hi, 1e-300)) {
    throw NotPsdError("PsdMatrix: negative eigenvalue " + std::to_string(lo));
  }
}

namespace detail {

Eigen::MatrixXd chol_factor_raw(const Eigen::MatrixXd& a, double jitter) {
  Eigen::MatrixXd shifted = a;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  // One retry with a trace-scaled jitter; genuine singularity past that
  // signals a caller bug (the callers always work with lambda I + (.)).
  double extra = default_jitter(a);
  shifted.diagonal().array() += extra;
  llt.compute(shifted);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  throw NotPsdError("chol_factor: matrix not positive definite (jitter " +
                    std::to_string(jitter + extra) + ")");
}

double quad_form_chol(const Eigen::MatrixXd& chol_lower, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = chol_lower.triangularView<Eigen::Lower>().solve(x);
  return y.squaredNorm();
}

double log_det_chol(const Eigen::MatrixXd& chol_lower) {
  return 2.0 * chol_lower.diagonal().array().log().sum();
}

void chol_rank_one_update(Eigen::MatrixXd& L, Eigen::VectorXd v) {
  const int n = int(L.rows());
  for (int k = 0; k < n; ++k) {
    double lkk = L(k, k);
    double vk = v(k);
    double r = std::hypot(lkk, vk);
    double c = r / lkk;
    double s = vk / lkk;
    L(k, k) = r;
    for (int i = k + 1; i < n; ++i) {
      L(i, k) = (L(i, k) + s * v(i)) / c;
      v(i) = c * v(i) - s * L(i, k);
    }
  }
}

}  // namespace detail

Eigen::MatrixXd chol_factor(const PsdMatrix& a, double jitter) {
  return detail::chol_factor_raw(a.mat(), jitter);
}

double quad_form(const PsdMatrix& a, double jitter, const Eigen::VectorXd& x) {
  if (x.size() != a.dim()) {
    throw NotPsdError("quad_form: dimension mismatch");
  }
  return detail::quad_form_chol(chol_factor(a, jitter), x);
}

double log_det(const PsdMatrix& a, double jitter) {
  return detail::log_det_chol(chol_factor(a, jitter));
}

std::pair<double, double> eigen_bounds(const PsdMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.mat(), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

}  // namespace adaptivity
